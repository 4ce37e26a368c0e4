#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/digest.hpp"
#include "mapo/rng.hpp"

namespace mapo {

enum class RoleTag { gradient_gen, prompt_edit, paraphrase, task_eval };

NLOHMANN_JSON_SERIALIZE_ENUM(RoleTag, {{RoleTag::gradient_gen, "gradient_gen"},
                                       {RoleTag::prompt_edit, "prompt_edit"},
                                       {RoleTag::paraphrase, "paraphrase"},
                                       {RoleTag::task_eval, "task_eval"}})

inline int default_max_tokens(RoleTag role) { return role == RoleTag::task_eval ? 16 : 512; }

struct LlmRequest {
    RoleTag role_tag = RoleTag::task_eval;
    std::string rendered_prompt;
    double temperature = 0.0;
    int max_tokens = 16;
    std::int64_t request_index = -1;  // assigned by the gateway at issue time

    static LlmRequest make(RoleTag role, std::string rendered, double temperature) {
        return LlmRequest{role, std::move(rendered), temperature, default_max_tokens(role), -1};
    }
};

struct LlmResponse {
    std::string text;
    std::int64_t request_index = -1;
    double latency_s = 0.0;
};

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

enum class TranscriptMode { record, replay, scripted };

NLOHMANN_JSON_SERIALIZE_ENUM(TranscriptMode, {{TranscriptMode::record, "record"},
                                              {TranscriptMode::replay, "replay"},
                                              {TranscriptMode::scripted, "scripted"}})

struct TranscriptEntry {
    LlmRequest request;
    LlmResponse response;
    std::string digest;  // sha256 of request.rendered_prompt
};

inline void to_json(json& j, const TranscriptEntry& e) {
    j = json{{"request_index", e.request.request_index},
             {"role_tag", e.request.role_tag},
             {"digest", e.digest},
             {"temperature", e.request.temperature},
             {"max_tokens", e.request.max_tokens},
             {"rendered_prompt", e.request.rendered_prompt},
             {"text", e.response.text},
             {"latency_s", e.response.latency_s}};
}

inline void from_json(const json& j, TranscriptEntry& e) {
    e.request.request_index = j.at("request_index").get<std::int64_t>();
    e.request.role_tag = j.at("role_tag").get<RoleTag>();
    e.request.temperature = j.at("temperature").get<double>();
    e.request.max_tokens = j.at("max_tokens").get<int>();
    e.request.rendered_prompt = j.at("rendered_prompt").get<std::string>();
    e.response.text = j.at("text").get<std::string>();
    e.response.request_index = e.request.request_index;
    e.response.latency_s = j.at("latency_s").get<double>();
    e.digest = j.value("digest", sha256_hex(e.request.rendered_prompt));
}

/// Append-only record of request/response pairs, one JSON object per line on disk.
struct Transcript {
    std::vector<TranscriptEntry> entries;
    TranscriptMode mode = TranscriptMode::record;

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write transcript " + path.string());
        for (const auto& e : entries) out << json(e).dump() << '\n';
    }

    static Transcript load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read transcript " + path.string());
        Transcript t;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_view(line).empty()) continue;
            try {
                t.entries.push_back(json::parse(line).get<TranscriptEntry>());
            } catch (const json::exception& ex) {
                throw Error("transcript " + path.string() + " line " + std::to_string(lineno) + ": " + ex.what());
            }
        }
        t.mode = TranscriptMode::replay;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct BackendReply {
    std::string text;
    double latency_s = 0.0;
};

/// Something that turns a rendered request into text. Implementations throw
/// GatewayError subclasses on failure.
class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendReply generate(const LlmRequest& req) = 0;
    virtual TranscriptMode transcript_mode() const = 0;
    /// True when latencies are simulated or recorded rather than measured.
    virtual bool deterministic_time() const { return true; }
    /// Only networked backends retry.
    virtual bool retries() const { return false; }
};

/// Deterministic backend answering from, in order of precedence: an exact
/// (role, digest) table, per-role FIFO queues, and an optional responder
/// function. Anything else is a ScriptExhaustedError.
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<std::optional<std::string>(const LlmRequest&)>;

    ScriptedBackend() = default;
    explicit ScriptedBackend(Responder responder, double latency_per_call_s = 0.0)
        : responder_(std::move(responder)), latency_s_(latency_per_call_s) {}

    void add_exact(RoleTag role, std::string_view rendered_prompt, std::string text) {
        add_digest(role, sha256_hex(rendered_prompt), std::move(text));
    }
    void add_digest(RoleTag role, std::string digest, std::string text) {
        std::lock_guard lock(mutex_);
        table_[{role, std::move(digest)}] = std::move(text);
    }
    void enqueue(RoleTag role, std::string text) {
        std::lock_guard lock(mutex_);
        queues_[role].push_back(std::move(text));
    }
    void set_responder(Responder responder) {
        std::lock_guard lock(mutex_);
        responder_ = std::move(responder);
    }

    /// Script file: one JSON object per line with "role_tag", "text" and
    /// optionally "digest". Lines with a digest go to the table, others to
    /// the role's queue.
    void load_script(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read script " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_view(line).empty()) continue;
            try {
                const json j = json::parse(line);
                const auto role = j.at("role_tag").get<RoleTag>();
                auto text = j.at("text").get<std::string>();
                if (j.contains("digest")) {
                    add_digest(role, j.at("digest").get<std::string>(), std::move(text));
                } else {
                    enqueue(role, std::move(text));
                }
            } catch (const json::exception& ex) {
                throw Error("script " + path.string() + " line " + std::to_string(lineno) + ": " + ex.what());
            }
        }
    }

    BackendReply generate(const LlmRequest& req) override {
        std::lock_guard lock(mutex_);
        if (auto it = table_.find({req.role_tag, sha256_hex(req.rendered_prompt)}); it != table_.end()) {
            return {it->second, latency_s_};
        }
        if (auto it = queues_.find(req.role_tag); it != queues_.end() && !it->second.empty()) {
            std::string text = std::move(it->second.front());
            it->second.pop_front();
            return {std::move(text), latency_s_};
        }
        if (responder_) {
            if (auto text = responder_(req)) return {std::move(*text), latency_s_};
        }
        throw ScriptExhaustedError("script exhausted for " + to_string(req.role_tag) + " request #" +
                                   std::to_string(req.request_index));
    }

    TranscriptMode transcript_mode() const override { return TranscriptMode::scripted; }

private:
    std::mutex mutex_;
    std::map<std::pair<RoleTag, std::string>, std::string> table_;
    std::map<RoleTag, std::deque<std::string>> queues_;
    Responder responder_;
    double latency_s_ = 0.0;
};

/// Serves responses from a recorded transcript keyed by (role, digest).
/// Repeated identical requests consume recorded responses in order and then
/// keep returning the last one.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const Transcript& transcript) {
        for (const auto& e : transcript.entries) {
            slots_[{e.request.role_tag, e.digest}].replies.push_back({e.response.text, e.response.latency_s});
        }
    }

    BackendReply generate(const LlmRequest& req) override {
        std::lock_guard lock(mutex_);
        const auto digest = sha256_hex(req.rendered_prompt);
        auto it = slots_.find({req.role_tag, digest});
        if (it == slots_.end()) {
            throw CacheMissError("replay cache miss: " + to_string(req.role_tag) + " digest " + digest);
        }
        auto& slot = it->second;
        const auto& reply = slot.replies[std::min(slot.cursor, slot.replies.size() - 1)];
        ++slot.cursor;
        return reply;
    }

    TranscriptMode transcript_mode() const override { return TranscriptMode::replay; }

private:
    struct Slot {
        std::vector<BackendReply> replies;
        std::size_t cursor = 0;
    };
    std::mutex mutex_;
    std::map<std::pair<RoleTag, std::string>, Slot> slots_;
};

// ---------------------------------------------------------------------------
// Retry policy
// ---------------------------------------------------------------------------

/// Exponential backoff with multiplicative jitter: retry k waits
/// base * 2^(k-1) * (1 + u), u ~ U[0,1), capped at max_delay_s.
class RetryPolicy {
public:
    struct Options {
        int max_retries = 5;
        double base_delay_s = 1.0;
        double max_delay_s = 60.0;
        std::uint64_t seed = 0;
    };

    RetryPolicy() : RetryPolicy(Options{}) {}
    explicit RetryPolicy(Options opts) : opts_(opts), engine_(rng::stream(opts.seed, rng::Stream::retry_jitter)) {}

    /// Delay before retry number `attempt` (1-based), or nullopt to give up.
    std::optional<double> delay(int attempt) {
        if (attempt < 1 || attempt > opts_.max_retries) return std::nullopt;
        std::uniform_real_distribution<double> jitter(0.0, 1.0);
        const double raw = opts_.base_delay_s * std::ldexp(1.0, attempt - 1) * (1.0 + jitter(engine_));
        return std::min(raw, opts_.max_delay_s);
    }

    const Options& options() const { return opts_; }

private:
    Options opts_;
    rng::Engine engine_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// The one place completions come from. Counts every attempt that reaches
/// the backend and keeps the transcript of successful exchanges.
class Gateway {
public:
    using Sleeper = std::function<void(double seconds)>;

    explicit Gateway(std::unique_ptr<Backend> backend, RetryPolicy retry = RetryPolicy{}, Sleeper sleeper = {})
        : backend_(std::move(backend)),
          retry_(std::move(retry)),
          sleeper_(sleeper ? std::move(sleeper)
                           : Sleeper([](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); })),
          started_(std::chrono::steady_clock::now()) {
        if (!backend_) throw GatewayError("gateway requires a backend");
        transcript_.mode = backend_->transcript_mode();
    }

    LlmResponse complete(LlmRequest req) {
        req.request_index = next_index_.fetch_add(1);
        for (int retry = 0;; ++retry) {
            try {
                const auto started = std::chrono::steady_clock::now();
                BackendReply reply = backend_->generate(req);
                if (!backend_->deterministic_time()) {
                    reply.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                }
                LlmResponse resp{std::move(reply.text), req.request_index, reply.latency_s};
                std::lock_guard lock(mutex_);
                ++calls_;
                latency_sum_s_ += resp.latency_s;
                transcript_.entries.push_back({req, resp, sha256_hex(req.rendered_prompt)});
                return resp;
            } catch (const NetworkError& err) {
                std::optional<double> wait;
                {
                    std::lock_guard lock(mutex_);
                    ++calls_;
                    if (backend_->retries() && err.retryable()) wait = retry_.delay(retry + 1);
                }
                if (!wait) throw;
                sleeper_(*wait);
            }
        }
    }

    std::int64_t call_count() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

    /// Seconds of run time: measured for live backends, summed recorded or
    /// simulated latencies otherwise.
    double elapsed_seconds() const {
        if (!backend_->deterministic_time()) {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        }
        std::lock_guard lock(mutex_);
        return latency_sum_s_;
    }

    Transcript transcript() const {
        std::lock_guard lock(mutex_);
        return transcript_;
    }

    TranscriptMode mode() const { return transcript_.mode; }

private:
    std::unique_ptr<Backend> backend_;
    RetryPolicy retry_;
    Sleeper sleeper_;
    std::chrono::steady_clock::time_point started_;
    std::atomic<std::int64_t> next_index_{0};
    mutable std::mutex mutex_;
    std::int64_t calls_ = 0;
    double latency_sum_s_ = 0.0;
    Transcript transcript_;
};

}  // namespace mapo
