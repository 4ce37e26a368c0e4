#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "mapo/core.hpp"

namespace mapo {

enum class TemplateName { tau, alpha, tau_negative, alpha_negative, paraphrase };

NLOHMANN_JSON_SERIALIZE_ENUM(TemplateName, {{TemplateName::tau, "tau"},
                                            {TemplateName::alpha, "alpha"},
                                            {TemplateName::tau_negative, "tau_negative"},
                                            {TemplateName::alpha_negative, "alpha_negative"},
                                            {TemplateName::paraphrase, "paraphrase"}})

/// A meta-prompt with `{slot}` placeholders.
struct PromptTemplate {
    TemplateName name = TemplateName::tau;
    std::string body;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline bool is_slot_char(char c, bool first) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalpha(u) || c == '_' || (!first && std::isdigit(u));
}

/// Length of the `{identifier}` at body[pos], or 0 if there is none.
inline std::size_t slot_length(std::string_view body, std::size_t pos) {
    if (body[pos] != '{') return 0;
    std::size_t i = pos + 1;
    while (i < body.size() && is_slot_char(body[i], i == pos + 1)) ++i;
    if (i == pos + 1 || i >= body.size() || body[i] != '}') return 0;
    return i - pos + 1;
}

}  // namespace detail

/// Slot names appearing in `body`, sorted.
inline std::set<std::string> template_slots(std::string_view body) {
    std::set<std::string> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (const auto len = detail::slot_length(body, i)) {
            out.emplace(body.substr(i + 1, len - 2));
            i += len - 1;
        }
    }
    return out;
}

/// Single-pass substitution. Bound values are inserted verbatim and never
/// re-scanned. Braces that do not form `{identifier}` are kept literally.
inline std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    const std::string_view body = tmpl.body;
    std::string out;
    out.reserve(body.size() + 256);
    for (std::size_t i = 0; i < body.size(); ++i) {
        const auto len = detail::slot_length(body, i);
        if (len == 0) {
            out.push_back(body[i]);
            continue;
        }
        const auto slot = body.substr(i + 1, len - 2);
        const auto it = bindings.find(slot);
        if (it == bindings.end()) {
            throw TemplateError("missing-slot: template " + to_string(tmpl.name) + " has no binding for {" +
                                std::string(slot) + "}");
        }
        out += it->second;
        i += len - 1;
    }
    return out;
}

// Gradient generation from correct examples, verbatim (indentation included).
inline constexpr std::string_view kTauBody =
    "\n"
    "        I'm trying to write a zero-shot {task_type} prompt.\n"
    "\n"
    "        My current prompt is:\n"
    "        \"{prompt}\"\n"
    "\n"
    "        This prompt gets the following examples correct:\n"
    "        {correct_string}\n"
    "\n"
    "        In addition, consider the following strengths of past\n"
    "        iterations of this prompt:\n"
    "        {positive_gradient_history}\n"
    "\n"
    "        Based on the above information, give {num_gradients} reasons why the \n"
    "        prompt could have gotten these examples correct.\n"
    "\n"
    "        Wrap each reason with <START> and <END>\n"
    "        ";

// Gradient application, verbatim.
inline constexpr std::string_view kAlphaBody =
    "\n"
    "        I'm trying to write a zero-shot {task_type} solver.\n"
    "\n"
    "        My current prompt is:\n"
    "        \"{prompt}\"\n"
    "\n"
    "        It gets the following examples correct:\n"
    "        {correct_str}\n"
    "\n"
    "        Based on these examples the strengths \n"
    "        with this current prompt are that {positive_feedback_str}\n"
    "\n"
    "        Consider the following strengths\n"
    "        of past iterations of this prompt:\n"
    "        {positive_gradient_history}\n"
    "\n"
    "        Based on the above information, \n"
    "        modify and revise the current prompt to create a new \n"
    "        prompt which improves upon the strengths of the \n"
    "        original wording.       \n"
    "        The new prompt is wrapped with <START> and <END>.\n"
    "\n"
    "        The 1 new prompt is:\n"
    "        ";

// Mirror of tau for failure analysis: "correct" -> "wrong",
// "strengths" -> "weaknesses/reasons the prompt failed".
inline constexpr std::string_view kTauNegativeBody =
    "\n"
    "        I'm trying to write a zero-shot {task_type} prompt.\n"
    "\n"
    "        My current prompt is:\n"
    "        \"{prompt}\"\n"
    "\n"
    "        This prompt gets the following examples wrong:\n"
    "        {correct_string}\n"
    "\n"
    "        In addition, consider the following weaknesses/reasons the prompt failed of past\n"
    "        iterations of this prompt:\n"
    "        {positive_gradient_history}\n"
    "\n"
    "        Based on the above information, give {num_gradients} reasons why the \n"
    "        prompt could have gotten these examples wrong.\n"
    "\n"
    "        Wrap each reason with <START> and <END>\n"
    "        ";

inline constexpr std::string_view kAlphaNegativeBody =
    "\n"
    "        I'm trying to write a zero-shot {task_type} solver.\n"
    "\n"
    "        My current prompt is:\n"
    "        \"{prompt}\"\n"
    "\n"
    "        It gets the following examples wrong:\n"
    "        {correct_str}\n"
    "\n"
    "        Based on these examples the weaknesses/reasons the prompt failed \n"
    "        with this current prompt are that {positive_feedback_str}\n"
    "\n"
    "        Consider the following weaknesses/reasons the prompt failed\n"
    "        of past iterations of this prompt:\n"
    "        {positive_gradient_history}\n"
    "\n"
    "        Based on the above information, \n"
    "        modify and revise the current prompt to create a new \n"
    "        prompt which fixes the weaknesses/reasons the prompt failed of the \n"
    "        original wording.       \n"
    "        The new prompt is wrapped with <START> and <END>.\n"
    "\n"
    "        The 1 new prompt is:\n"
    "        ";

inline constexpr std::string_view kParaphraseBody =
    "\n"
    "        Generate a variation of the following instruction while keeping the semantic meaning.\n"
    "\n"
    "        Input: {prompt}\n"
    "\n"
    "        The new instruction is wrapped with <START> and <END>.\n"
    "\n"
    "        The 1 new instruction is:\n"
    "        ";

/// The five meta-prompts used by expansion.
struct TemplateSet {
    PromptTemplate tau{TemplateName::tau, std::string(kTauBody)};
    PromptTemplate alpha{TemplateName::alpha, std::string(kAlphaBody)};
    PromptTemplate tau_negative{TemplateName::tau_negative, std::string(kTauNegativeBody)};
    PromptTemplate alpha_negative{TemplateName::alpha_negative, std::string(kAlphaNegativeBody)};
    PromptTemplate paraphrase{TemplateName::paraphrase, std::string(kParaphraseBody)};

    PromptTemplate& get(TemplateName name) {
        switch (name) {
            case TemplateName::tau: return tau;
            case TemplateName::alpha: return alpha;
            case TemplateName::tau_negative: return tau_negative;
            case TemplateName::alpha_negative: return alpha_negative;
            case TemplateName::paraphrase: return paraphrase;
        }
        return tau;
    }

    /// Replaces any template for which `<dir>/<name>.txt` exists.
    static TemplateSet with_overrides(const std::filesystem::path& dir) {
        TemplateSet set;
        for (const auto name : {TemplateName::tau, TemplateName::alpha, TemplateName::tau_negative,
                                TemplateName::alpha_negative, TemplateName::paraphrase}) {
            const auto file = dir / (to_string(name) + ".txt");
            if (!std::filesystem::exists(file)) continue;
            std::ifstream in(file, std::ios::binary);
            std::ostringstream body;
            body << in.rdbuf();
            set.get(name).body = body.str();
        }
        return set;
    }
};

}  // namespace mapo
