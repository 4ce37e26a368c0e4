#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>

#include "mapo/gateway.hpp"

namespace mapo {

struct LiveOptions {
    std::string url = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    std::string api_key;
    double timeout_s = 60.0;
};

/// Builds the chat-completions request body for one user turn.
inline json chat_request_body(const LlmRequest& req, const std::string& model) {
    return json{{"model", model},
                {"messages", json::array({json{{"role", "user"}, {"content", req.rendered_prompt}}})},
                {"temperature", req.temperature},
                {"max_tokens", req.max_tokens}};
}

/// Pulls choices[0].message.content out of a chat-completions response.
inline std::string chat_response_text(const std::string& body) {
    json parsed;
    try {
        parsed = json::parse(body);
    } catch (const json::exception& ex) {
        throw NetworkError(std::string("malformed completion body: ") + ex.what(), 0, false);
    }
    const auto& choices = parsed.value("choices", json::array());
    if (!choices.is_array() || choices.empty()) throw NetworkError("completion has no choices", 0, false);
    const auto& content = choices.front().value("message", json::object()).value("content", json());
    if (!content.is_string()) throw NetworkError("completion has no message content", 0, false);
    return content.get<std::string>();
}

/// OpenAI-compatible chat-completions client. 429 and 5xx responses and
/// transport failures are retryable; other HTTP errors are not.
class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveOptions opts) : opts_(std::move(opts)) { split_url(); }

    BackendReply generate(const LlmRequest& req) override {
        httplib::Client client(origin_);
        const auto timeout = std::chrono::duration<double>(opts_.timeout_s);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        httplib::Headers headers;
        if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);

        const auto res = client.Post(path_, headers, chat_request_body(req, opts_.model).dump(), "application/json");
        if (!res) throw NetworkError("transport error: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500) {
            throw NetworkError("HTTP " + std::to_string(res->status), res->status, true);
        }
        if (res->status != 200) {
            throw NetworkError("HTTP " + std::to_string(res->status) + ": " + res->body, res->status, false);
        }
        return {chat_response_text(res->body), 0.0};
    }

    TranscriptMode transcript_mode() const override { return TranscriptMode::record; }
    bool deterministic_time() const override { return false; }
    bool retries() const override { return true; }

private:
    void split_url() {
        const auto scheme = opts_.url.find("://");
        if (scheme == std::string::npos) throw ConfigError("backend url needs a scheme: " + opts_.url);
        const auto path_start = opts_.url.find('/', scheme + 3);
        origin_ = opts_.url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : opts_.url.substr(path_start);
    }

    LiveOptions opts_;
    std::string origin_;
    std::string path_;
};

}  // namespace mapo
