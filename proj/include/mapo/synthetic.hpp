#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mapo/datasets.hpp"
#include "mapo/digest.hpp"
#include "mapo/gateway.hpp"
#include "mapo/gradient_engine.hpp"

// A deterministic stand-in for an LLM, used behind ScriptedBackend for
// offline runs and tests. Every response is a pure function of the request
// with the momentum history slot blanked out, so runs that differ only in
// their history binding receive identical responses.

namespace mapo::synthetic {

/// Uniform value in [0,1) derived from `key`.
inline double unit_hash(std::string_view key) {
    const auto hex = sha256_hex(key);
    return static_cast<double>(std::stoull(hex.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
}

inline std::string short_hash(std::string_view key, std::size_t len = 8) { return sha256_hex(key).substr(0, len); }

/// Removes the history slot content (the text following "iterations of this
/// prompt:" up to the next blank line) from a rendered meta-prompt.
inline std::string strip_history(std::string_view rendered) {
    constexpr std::string_view marker = "iterations of this prompt:\n";
    const auto at = rendered.find(marker);
    if (at == std::string_view::npos) return std::string(rendered);
    const auto start = at + marker.size();
    const auto end = rendered.find("\n\n", start);
    std::string out(rendered.substr(0, start));
    if (end != std::string_view::npos) out.append(rendered.substr(end));
    return out;
}

/// Text between `My current prompt is:\n<indent>"` and the closing quote line.
inline std::optional<std::string> current_prompt(std::string_view rendered) {
    constexpr std::string_view head = "My current prompt is:\n";
    auto at = rendered.find(head);
    if (at == std::string_view::npos) return std::nullopt;
    at = rendered.find('"', at + head.size());
    if (at == std::string_view::npos) return std::nullopt;
    const auto end = rendered.find("\"\n", at + 1);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(rendered.substr(at + 1, end - at - 1));
}

/// Requested number of reasons in a gradient-generation prompt.
inline int requested_reasons(std::string_view rendered) {
    constexpr std::string_view head = "give ";
    const auto at = rendered.find(head);
    if (at == std::string_view::npos) return 1;
    int n = 0;
    for (auto i = at + head.size(); i < rendered.size() && rendered[i] >= '0' && rendered[i] <= '9'; ++i) {
        n = n * 10 + (rendered[i] - '0');
    }
    return n > 0 ? n : 1;
}

/// Ground truth and behaviour of the simulated model.
struct World {
    std::map<std::string, std::string, std::less<>> gold;  // input_text -> label
    std::vector<std::string> labels;
    /// Probability that a prompt answers any given example correctly.
    std::function<double(std::string_view prompt)> quality = [](std::string_view prompt) {
        return 0.55 + 0.4 * unit_hash(std::string("quality\x1f") + std::string(prompt));
    };

    static World from_examples(const std::vector<Example>& examples, std::vector<std::string> labels = {}) {
        World w;
        for (const auto& ex : examples) w.gold.emplace(ex.input_text, ex.label);
        w.labels = labels.empty() ? distinct_labels(examples) : std::move(labels);
        return w;
    }
};

namespace detail {

inline std::optional<std::string> answer_task(const World& world, std::string_view rendered) {
    // The input is the longest suffix after a newline that is a known example.
    for (std::size_t nl = rendered.find('\n'); nl != std::string_view::npos; nl = rendered.find('\n', nl + 1)) {
        const auto input = rendered.substr(nl + 1);
        const auto it = world.gold.find(input);
        if (it == world.gold.end()) continue;
        const auto prompt = rendered.substr(0, nl);
        const double q = world.quality(prompt);
        const bool correct = unit_hash(std::string("answer\x1f") + std::string(rendered)) < q;
        if (correct || world.labels.size() < 2) return "Answer: " + it->second + ".";
        for (const auto& label : world.labels) {
            if (label != it->second) return "Answer: " + label + ".";
        }
    }
    return std::nullopt;
}

inline std::string reasons(std::string_view rendered) {
    const auto key = strip_history(rendered);
    const bool negative = key.find("examples wrong") != std::string::npos;
    const int n = requested_reasons(key);
    std::string out;
    for (int k = 1; k <= n; ++k) {
        const auto tag = short_hash(key + "\x1f" + std::to_string(k), 6);
        out += std::string(kStartDelimiter) +
               (negative ? "The prompt overlooks cue " + tag + "." : "The prompt highlights cue " + tag + ".") +
               std::string(kEndDelimiter) + "\n";
    }
    return out;
}

inline std::string edited(std::string_view rendered, std::string_view label) {
    const auto key = strip_history(rendered);
    const auto base = current_prompt(key).value_or("Answer the question.");
    return std::string(kStartDelimiter) + base + " " + std::string(label) + " " + short_hash(key, 6) + "." +
           std::string(kEndDelimiter);
}

}  // namespace detail

/// Responder for ScriptedBackend backed by `world`.
inline ScriptedBackend::Responder responder(World world) {
    return [world = std::move(world)](const LlmRequest& req) -> std::optional<std::string> {
        switch (req.role_tag) {
            case RoleTag::task_eval: return detail::answer_task(world, req.rendered_prompt);
            case RoleTag::gradient_gen: return detail::reasons(req.rendered_prompt);
            case RoleTag::prompt_edit: return detail::edited(req.rendered_prompt, "Refine");
            case RoleTag::paraphrase: {
                constexpr std::string_view head = "Input: ";
                const auto& r = req.rendered_prompt;
                const auto at = r.find(head);
                const auto end = at == std::string::npos ? std::string::npos : r.find('\n', at);
                const auto base = at == std::string::npos ? std::string("Answer the question.")
                                                          : r.substr(at + head.size(), end - at - head.size());
                return std::string(kStartDelimiter) + base + " Rephrase " + short_hash(r, 6) + "." +
                       std::string(kEndDelimiter);
            }
        }
        return std::nullopt;
    };
}

/// Binary Yes/No dataset of `n` distinct statements with labels from a hash.
inline std::vector<Example> make_dataset(int n, std::string_view salt = "statement") {
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::string input = "Statement " + std::to_string(i) + ": claim " + short_hash(std::string(salt) + std::to_string(i), 10);
        const std::string label = unit_hash(std::string(salt) + "\x1flabel\x1f" + std::to_string(i)) < 0.5 ? "Yes" : "No";
        out.push_back(Example{i, input, label});
    }
    return out;
}

}  // namespace mapo::synthetic
