#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mapo/error.hpp"

namespace mapo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Identifiers
//
// Ids are sequence numbers handed out in creation order, so a replayed run
// reproduces them exactly.
// ---------------------------------------------------------------------------

struct PromptId {
    std::uint64_t value = 0;
    auto operator<=>(const PromptId&) const = default;
};

struct GradientId {
    std::uint64_t value = 0;
    auto operator<=>(const GradientId&) const = default;
};

inline void to_json(json& j, const PromptId& id) { j = id.value; }
inline void from_json(const json& j, PromptId& id) { id.value = j.get<std::uint64_t>(); }
inline void to_json(json& j, const GradientId& id) { j = id.value; }
inline void from_json(const json& j, GradientId& id) { id.value = j.get<std::uint64_t>(); }

template <typename Id>
class IdSequence {
public:
    Id next() { return Id{next_++}; }
    std::uint64_t peek() const { return next_; }

private:
    std::uint64_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Small string helpers shared across modules
// ---------------------------------------------------------------------------

inline std::string_view trim_view(std::string_view s) {
    constexpr std::string_view ws = " \t\n\r\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Polarity { positive, negative };
enum class GradientMode { positive_only, negative_only, both };
enum class TaskType { classification, math };
enum class HistoryStrategy { latest_sample, concatenate_samples };
enum class BanditUpdate { paper, running_mean };

NLOHMANN_JSON_SERIALIZE_ENUM(Polarity, {{Polarity::positive, "positive"}, {Polarity::negative, "negative"}})
NLOHMANN_JSON_SERIALIZE_ENUM(GradientMode, {{GradientMode::positive_only, "positive_only"},
                                            {GradientMode::negative_only, "negative_only"},
                                            {GradientMode::both, "both"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TaskType, {{TaskType::classification, "classification"}, {TaskType::math, "math"}})
NLOHMANN_JSON_SERIALIZE_ENUM(HistoryStrategy, {{HistoryStrategy::latest_sample, "latest_sample"},
                                               {HistoryStrategy::concatenate_samples, "concatenate_samples"}})
NLOHMANN_JSON_SERIALIZE_ENUM(BanditUpdate, {{BanditUpdate::paper, "paper"}, {BanditUpdate::running_mean, "running_mean"}})

template <typename Enum>
std::string to_string(Enum e) {
    return json(e).template get<std::string>();
}

/// Parses an enum from its serialized name; throws ConfigError naming `field` on failure.
template <typename Enum>
Enum enum_from_string(std::string_view text, std::string_view field) {
    const json j = std::string(text);
    const Enum parsed = j.get<Enum>();
    // nlohmann falls back to the first enumerator for unknown strings.
    if (json(parsed).get<std::string>() != text) {
        throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(field));
    }
    return parsed;
}

// ---------------------------------------------------------------------------
// Prompt
// ---------------------------------------------------------------------------

/// A candidate prompt with its lineage and cached scores.
///
/// Only the seed (round 0) has no parent. A child produced by a gradient
/// edit records the gradient; paraphrase children carry a parent only.
struct Prompt {
    PromptId id;
    std::string text;
    int round = 0;
    std::optional<PromptId> parent_id;
    std::optional<GradientId> gradient_id;
    std::optional<double> train_score;
    std::optional<double> test_score;

    bool operator==(const Prompt&) const = default;
};

inline void check_invariants(const Prompt& p) {
    if (trim_view(p.text).empty()) throw Error("prompt text is empty");
    if (p.round < 0) throw Error("prompt round is negative");
    if ((p.round == 0) != !p.parent_id.has_value()) {
        throw Error("prompt lineage: round 0 iff no parent (prompt " + std::to_string(p.id.value) + ")");
    }
    if (p.gradient_id && !p.parent_id) throw Error("prompt has a gradient but no parent");
    for (const auto& score : {p.train_score, p.test_score}) {
        if (score && (*score < 0.0 || *score > 1.0)) throw Error("prompt score outside [0,1]");
    }
}

/// Seed prompt p0. Outer whitespace is trimmed; the rest is kept verbatim.
inline Prompt new_seed_prompt(std::string_view text, PromptId id = {}) {
    std::string trimmed = trim(text);
    if (trimmed.empty()) throw Error("empty-text: seed prompt must not be empty");
    Prompt seed;
    seed.id = id;
    seed.text = std::move(trimmed);
    return seed;
}

/// Child created in `round`, which must come after the parent's round.
inline Prompt new_child_prompt(PromptId id, std::string_view text, const Prompt& parent, int round,
                               std::optional<GradientId> gradient) {
    if (round <= parent.round) throw Error("child round must exceed parent round");
    Prompt child;
    child.id = id;
    child.text = trim(text);
    child.round = round;
    child.parent_id = parent.id;
    child.gradient_id = gradient;
    check_invariants(child);
    return child;
}

inline void to_json(json& j, const Prompt& p) {
    j = json{{"id", p.id},
             {"text", p.text},
             {"round", p.round},
             {"parent_id", p.parent_id ? json(*p.parent_id) : json(nullptr)},
             {"gradient_id", p.gradient_id ? json(*p.gradient_id) : json(nullptr)},
             {"train_score", p.train_score ? json(*p.train_score) : json(nullptr)},
             {"test_score", p.test_score ? json(*p.test_score) : json(nullptr)}};
}

namespace detail {
template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}
}  // namespace detail

inline void from_json(const json& j, Prompt& p) {
    p.id = j.at("id").get<PromptId>();
    p.text = j.at("text").get<std::string>();
    p.round = j.at("round").get<int>();
    p.parent_id = detail::optional_field<PromptId>(j, "parent_id");
    p.gradient_id = detail::optional_field<GradientId>(j, "gradient_id");
    p.train_score = detail::optional_field<double>(j, "train_score");
    p.test_score = detail::optional_field<double>(j, "test_score");
    check_invariants(p);
}

// ---------------------------------------------------------------------------
// Gradient
// ---------------------------------------------------------------------------

inline constexpr std::string_view kStartDelimiter = "<START>";
inline constexpr std::string_view kEndDelimiter = "<END>";

/// One natural-language reason extracted from a gradient-generation completion.
struct Gradient {
    GradientId id;
    std::string text;
    PromptId source_prompt_id;
    int round = 0;
    Polarity polarity = Polarity::positive;

    bool operator==(const Gradient&) const = default;
};

inline void check_invariants(const Gradient& g) {
    if (trim_view(g.text).empty()) throw Error("gradient text is empty");
    if (g.text.find(kStartDelimiter) != std::string::npos || g.text.find(kEndDelimiter) != std::string::npos) {
        throw Error("gradient text contains a delimiter");
    }
    if (g.round < 0) throw Error("gradient round is negative");
}

inline void to_json(json& j, const Gradient& g) {
    j = json{{"id", g.id},
             {"text", g.text},
             {"source_prompt_id", g.source_prompt_id},
             {"round", g.round},
             {"polarity", g.polarity}};
}

inline void from_json(const json& j, Gradient& g) {
    g.id = j.at("id").get<GradientId>();
    g.text = j.at("text").get<std::string>();
    g.source_prompt_id = j.at("source_prompt_id").get<PromptId>();
    g.round = j.at("round").get<int>();
    g.polarity = j.at("polarity").get<Polarity>();
    check_invariants(g);
}

// ---------------------------------------------------------------------------
// GradientHistory and Beam
// ---------------------------------------------------------------------------

/// Round-indexed gradient pools plus the single momentum sample drawn per round.
struct GradientHistory {
    std::map<int, std::vector<GradientId>> pools;
    std::map<int, GradientId> sampled;

    bool operator==(const GradientHistory&) const = default;
};

inline void to_json(json& j, const GradientHistory& h) {
    json pools = json::object();
    for (const auto& [round, ids] : h.pools) pools[std::to_string(round)] = ids;
    json sampled = json::object();
    for (const auto& [round, id] : h.sampled) sampled[std::to_string(round)] = id;
    j = json{{"pools", pools}, {"sampled", sampled}};
}

inline void from_json(const json& j, GradientHistory& h) {
    h = {};
    for (const auto& [key, ids] : j.at("pools").items()) h.pools[std::stoi(key)] = ids.get<std::vector<GradientId>>();
    for (const auto& [key, id] : j.at("sampled").items()) h.sampled[std::stoi(key)] = id.get<GradientId>();
}

/// All prompts of a run by id.
using PromptStore = std::map<PromptId, Prompt>;

struct Beam {
    int round = 0;
    std::vector<PromptId> prompts;

    bool operator==(const Beam&) const = default;
};

inline void to_json(json& j, const Beam& b) { j = json{{"round", b.round}, {"prompts", b.prompts}}; }

inline void from_json(const json& j, Beam& b) {
    b.round = j.at("round").get<int>();
    b.prompts = j.at("prompts").get<std::vector<PromptId>>();
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// UCB selection parameters. The defaults are not taken from any published
/// setup; they are echoed into every run artifact.
struct BanditConfig {
    int time_steps = 25;
    int sample_size = 32;
    double exploration = 1.0;
    BanditUpdate update = BanditUpdate::paper;

    bool operator==(const BanditConfig&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BanditConfig, time_steps, sample_size, exploration, update)

struct RunConfig {
    int beam_width = 4;
    int search_depth = 6;
    int minibatch_size = 64;
    int candidates_per_parent = 8;
    int num_gradients = 2;
    int num_correct_examples = 3;
    double temperature = 0.0;
    int test_set_size = 200;
    GradientMode gradient_mode = GradientMode::positive_only;
    bool momentum_enabled = true;
    bool baseline_mode = false;
    BanditConfig bandit;
    std::uint64_t rng_seed = 0;

    // Switches around the default algorithm.
    bool parent_retention = true;
    bool full_beam_test_eval = false;
    HistoryStrategy history_strategy = HistoryStrategy::latest_sample;
    int paraphrases_per_parent = 2;
    std::optional<double> target_score;

    bool operator==(const RunConfig&) const = default;
};

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"beam_width", c.beam_width},
             {"search_depth", c.search_depth},
             {"minibatch_size", c.minibatch_size},
             {"candidates_per_parent", c.candidates_per_parent},
             {"num_gradients", c.num_gradients},
             {"num_correct_examples", c.num_correct_examples},
             {"temperature", c.temperature},
             {"test_set_size", c.test_set_size},
             {"gradient_mode", c.gradient_mode},
             {"momentum_enabled", c.momentum_enabled},
             {"baseline_mode", c.baseline_mode},
             {"bandit", c.bandit},
             {"rng_seed", c.rng_seed},
             {"parent_retention", c.parent_retention},
             {"full_beam_test_eval", c.full_beam_test_eval},
             {"history_strategy", c.history_strategy},
             {"paraphrases_per_parent", c.paraphrases_per_parent},
             {"target_score", c.target_score ? json(*c.target_score) : json(nullptr)}};
}

inline void from_json(const json& j, RunConfig& c) {
    c.beam_width = j.at("beam_width").get<int>();
    c.search_depth = j.at("search_depth").get<int>();
    c.minibatch_size = j.at("minibatch_size").get<int>();
    c.candidates_per_parent = j.at("candidates_per_parent").get<int>();
    c.num_gradients = j.at("num_gradients").get<int>();
    c.num_correct_examples = j.at("num_correct_examples").get<int>();
    c.temperature = j.at("temperature").get<double>();
    c.test_set_size = j.at("test_set_size").get<int>();
    c.gradient_mode = j.at("gradient_mode").get<GradientMode>();
    c.momentum_enabled = j.at("momentum_enabled").get<bool>();
    c.baseline_mode = j.at("baseline_mode").get<bool>();
    c.bandit = j.at("bandit").get<BanditConfig>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.parent_retention = j.value("parent_retention", true);
    c.full_beam_test_eval = j.value("full_beam_test_eval", false);
    c.history_strategy = j.value("history_strategy", HistoryStrategy::latest_sample);
    c.paraphrases_per_parent = j.value("paraphrases_per_parent", 2);
    c.target_score = detail::optional_field<double>(j, "target_score");
}

/// Returns `cfg` unchanged when every field is legal; otherwise throws a
/// ConfigError naming the offending field.
inline RunConfig validate_config(const RunConfig& cfg) {
    const auto positive = [](int value, const char* field) {
        if (value < 1) throw ConfigError(std::string("nonpositive ") + field + ": " + std::to_string(value));
    };
    positive(cfg.beam_width, "beam_width");
    positive(cfg.search_depth, "search_depth");
    positive(cfg.minibatch_size, "minibatch_size");
    positive(cfg.candidates_per_parent, "candidates_per_parent");
    positive(cfg.num_gradients, "num_gradients");
    positive(cfg.num_correct_examples, "num_correct_examples");
    positive(cfg.test_set_size, "test_set_size");
    positive(cfg.bandit.time_steps, "bandit.time_steps");
    positive(cfg.bandit.sample_size, "bandit.sample_size");
    if (cfg.temperature < 0.0) throw ConfigError("negative temperature");
    if (cfg.bandit.exploration < 0.0) throw ConfigError("negative bandit.exploration");
    if (cfg.paraphrases_per_parent < 0) throw ConfigError("negative paraphrases_per_parent");
    if (cfg.candidates_per_parent % cfg.num_gradients != 0) {
        throw ConfigError("divisibility: candidates_per_parent (" + std::to_string(cfg.candidates_per_parent) +
                          ") is not a multiple of num_gradients (" + std::to_string(cfg.num_gradients) + ")");
    }
    if (cfg.gradient_mode == GradientMode::both && cfg.num_gradients < 2) {
        throw ConfigError("gradient_mode both needs num_gradients >= 2 to hold both polarities");
    }
    if (cfg.baseline_mode && cfg.gradient_mode != GradientMode::negative_only) {
        throw ConfigError("baseline_mode requires gradient_mode negative_only");
    }
    if (cfg.target_score && (*cfg.target_score < 0.0 || *cfg.target_score > 1.0)) {
        throw ConfigError("target_score outside [0,1]");
    }
    return cfg;
}

/// Number of gradient-application calls issued per gradient.
inline int edits_per_gradient(const RunConfig& cfg) { return cfg.candidates_per_parent / cfg.num_gradients; }

/// How num_gradients is apportioned between polarities. In `both` mode the
/// positive side receives the larger half.
struct GradientQuota {
    int positive = 0;
    int negative = 0;
};

inline GradientQuota gradient_quota(const RunConfig& cfg) {
    switch (cfg.gradient_mode) {
        case GradientMode::positive_only: return {cfg.num_gradients, 0};
        case GradientMode::negative_only: return {0, cfg.num_gradients};
        case GradientMode::both: return {(cfg.num_gradients + 1) / 2, cfg.num_gradients / 2};
    }
    return {};
}

}  // namespace mapo
