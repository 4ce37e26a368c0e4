#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/datasets.hpp"
#include "mapo/gateway.hpp"
#include "mapo/templates.hpp"

namespace mapo {

/// Slot value used whenever no momentum gradient is injected.
inline constexpr std::string_view kNoHistory = "(none)";

/// Inner texts of every `<START>...<END>` span, in order and trimmed. A span
/// opens at the last `<START>` before its `<END>`; stray delimiters are
/// ignored and blank spans are dropped.
inline std::vector<std::string> parse_delimited(std::string_view raw) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto close = raw.find(kEndDelimiter, pos);
        if (close == std::string_view::npos) break;
        const auto open = raw.substr(0, close).rfind(kStartDelimiter);
        if (open != std::string_view::npos && open >= pos) {
            const auto inner_start = open + kStartDelimiter.size();
            auto inner = trim(raw.substr(inner_start, close - inner_start));
            if (!inner.empty()) out.push_back(std::move(inner));
        }
        pos = close + kEndDelimiter.size();
    }
    return out;
}

/// Sample formatted as "Input: ...\nCorrect answer: ..." blocks separated by blank lines.
inline std::string format_examples(const std::vector<Example>& examples) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "Input: " + examples[i].input_text + "\nCorrect answer: " + examples[i].label;
    }
    return out;
}

/// Candidate ordinal appended to repeated edit/paraphrase requests so that
/// temperature-0 calls stay distinct.
inline std::string variant_line(int j, int k) {
    return "Variant " + std::to_string(j) + " of " + std::to_string(k);
}

/// Non-fatal expansion problem recorded in the run artifact.
struct Shortfall {
    int round = 0;
    PromptId prompt_id;
    std::string kind;  // empty_sample | gradient_parse | edit_parse | paraphrase_parse
    std::string detail;
};

inline void to_json(json& j, const Shortfall& s) {
    j = json{{"round", s.round}, {"prompt_id", s.prompt_id}, {"kind", s.kind}, {"detail", s.detail}};
}

/// Shared state for the calls that grow the candidate pool.
struct ExpansionContext {
    const RunConfig& cfg;
    const TemplateSet& templates;
    Gateway& gateway;
    TaskType task_type = TaskType::classification;
    int round = 0;  // search round being expanded; children are created in round + 1
    IdSequence<PromptId>& prompt_ids;
    IdSequence<GradientId>& gradient_ids;
    std::vector<Shortfall>& shortfalls;
};

inline Bindings base_bindings(const Prompt& parent, const ExampleSample& sample, std::string_view history,
                              TaskType task_type) {
    const std::string examples = format_examples(sample.examples);
    return Bindings{{"task_type", to_string(task_type)},
                    {"prompt", parent.text},
                    {"correct_string", examples},
                    {"correct_str", examples},
                    {"positive_gradient_history", std::string(history)},
                    {"num_gradients", ""},
                    {"positive_feedback_str", ""}};
}

/// One gradient_gen call on the tau template matching `polarity`; keeps at
/// most `count` reasons. An empty sample skips the call entirely.
inline std::vector<Gradient> generate_gradients(const Prompt& parent, const ExampleSample& sample,
                                                std::string_view history, Polarity polarity, int count,
                                                ExpansionContext& ctx) {
    if (sample.examples.empty()) {
        ctx.shortfalls.push_back({ctx.round, parent.id, "empty_sample",
                                  "no " + to_string(sample.correctness) + " examples; gradient call skipped"});
        return {};
    }
    if (count < 1) return {};
    Bindings bindings = base_bindings(parent, sample, history, ctx.task_type);
    bindings["num_gradients"] = std::to_string(count);
    const auto& tmpl = polarity == Polarity::positive ? ctx.templates.tau : ctx.templates.tau_negative;
    const auto reply =
        ctx.gateway.complete(LlmRequest::make(RoleTag::gradient_gen, render(tmpl, bindings), ctx.cfg.temperature));

    auto reasons = parse_delimited(reply.text);
    if (reasons.size() < static_cast<std::size_t>(count)) {
        ctx.shortfalls.push_back({ctx.round, parent.id, "gradient_parse",
                                  "expected " + std::to_string(count) + " reasons, parsed " +
                                      std::to_string(reasons.size())});
    }
    if (reasons.size() > static_cast<std::size_t>(count)) reasons.resize(static_cast<std::size_t>(count));

    std::vector<Gradient> out;
    out.reserve(reasons.size());
    for (auto& text : reasons) {
        Gradient g{ctx.gradient_ids.next(), std::move(text), parent.id, ctx.round, polarity};
        check_invariants(g);
        out.push_back(std::move(g));
    }
    return out;
}

/// Issues candidates_per_parent / num_gradients prompt_edit calls for one
/// gradient. Each parsed completion becomes a child of `parent`.
inline std::vector<Prompt> apply_gradient(const Prompt& parent, const Gradient& grad, const ExampleSample& sample,
                                          std::string_view history, ExpansionContext& ctx) {
    if (grad.source_prompt_id != parent.id) throw Error("gradient does not belong to this parent");
    Bindings bindings = base_bindings(parent, sample, history, ctx.task_type);
    bindings["positive_feedback_str"] = grad.text;
    const auto& tmpl = grad.polarity == Polarity::positive ? ctx.templates.alpha : ctx.templates.alpha_negative;
    const std::string rendered = render(tmpl, bindings);

    const int edits = edits_per_gradient(ctx.cfg);
    std::vector<Prompt> children;
    for (int j = 1; j <= edits; ++j) {
        const auto reply = ctx.gateway.complete(
            LlmRequest::make(RoleTag::prompt_edit, rendered + variant_line(j, edits), ctx.cfg.temperature));
        const auto spans = parse_delimited(reply.text);
        if (spans.empty()) {
            ctx.shortfalls.push_back({ctx.round, parent.id, "edit_parse",
                                      "gradient " + std::to_string(grad.id.value) + " " + variant_line(j, edits) +
                                          ": no delimited prompt"});
            continue;
        }
        children.push_back(new_child_prompt(ctx.prompt_ids.next(), spans.front(), parent, ctx.round + 1, grad.id));
    }
    return children;
}

/// `n` paraphrase calls on the parent; children carry no gradient.
inline std::vector<Prompt> paraphrase_expand(const Prompt& parent, int n, ExpansionContext& ctx) {
    std::vector<Prompt> children;
    if (n <= 0) return children;
    const std::string rendered = render(ctx.templates.paraphrase, Bindings{{"prompt", parent.text}});
    for (int j = 1; j <= n; ++j) {
        const auto reply = ctx.gateway.complete(
            LlmRequest::make(RoleTag::paraphrase, rendered + variant_line(j, n), ctx.cfg.temperature));
        const auto spans = parse_delimited(reply.text);
        if (spans.empty()) {
            ctx.shortfalls.push_back({ctx.round, parent.id, "paraphrase_parse", variant_line(j, n)});
            continue;
        }
        children.push_back(new_child_prompt(ctx.prompt_ids.next(), spans.front(), parent, ctx.round + 1, std::nullopt));
    }
    return children;
}

}  // namespace mapo
