#pragma once

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/datasets.hpp"
#include "mapo/gateway.hpp"

namespace mapo {

struct Prediction {
    int example_id = 0;
    std::string raw_output;
    std::optional<std::string> parsed_label;
    bool correct = false;
};

inline void to_json(json& j, const Prediction& p) {
    j = json{{"example_id", p.example_id},
             {"raw_output", p.raw_output},
             {"parsed_label", p.parsed_label ? json(*p.parsed_label) : json(nullptr)},
             {"correct", p.correct}};
}

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Positive-class F1; zero when there are no true positives.
inline double f1(const ConfusionCounts& cc) {
    if (cc.tp == 0) return 0.0;
    return 2.0 * static_cast<double>(cc.tp) / static_cast<double>(2 * cc.tp + cc.fp + cc.fn);
}

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

/// Position of the first case-insensitive whole-token occurrence of `needle`.
inline std::optional<std::size_t> find_token(std::string_view hay, std::string_view needle) {
    if (needle.empty() || needle.size() > hay.size()) return std::nullopt;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (i > 0 && is_word_char(hay[i - 1])) continue;
        const std::size_t end = i + needle.size();
        if (end < hay.size() && is_word_char(hay[end])) continue;
        if (iequals(hay.substr(i, needle.size()), needle)) return i;
    }
    return std::nullopt;
}

inline std::string canonical_number(std::string_view token) {
    std::string out;
    for (const char c : token) {
        if (c != ',' && !std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    }
    if (out.find('.') != std::string::npos) {
        while (!out.empty() && out.back() == '0') out.pop_back();
        if (!out.empty() && out.back() == '.') out.pop_back();
    }
    return out;
}

inline const std::regex& number_pattern() {
    static const std::regex pattern(R"(-?\d[\d,]*(?:\.\d+)?)");
    return pattern;
}

}  // namespace detail

/// The label whose first whole-token occurrence in `raw` comes earliest
/// (case-insensitive). Ties at one position go to the longer label.
inline std::optional<std::string> parse_label(std::string_view raw, const std::vector<std::string>& label_set) {
    std::optional<std::string> best;
    std::size_t best_pos = std::string_view::npos;
    for (const auto& label : label_set) {
        const auto pos = detail::find_token(raw, label);
        if (!pos) continue;
        if (*pos < best_pos || (*pos == best_pos && label.size() > best->size())) {
            best_pos = *pos;
            best = label;
        }
    }
    return best;
}

/// Final answer of a math completion: what follows the last "####" marker if
/// present, otherwise the last number in the text.
inline std::optional<std::string> parse_math_answer(std::string_view raw) {
    const std::string text(raw);
    if (const auto marker = text.rfind("####"); marker != std::string::npos) {
        const std::string tail = text.substr(marker + 4);
        std::smatch m;
        if (std::regex_search(tail, m, detail::number_pattern())) return detail::canonical_number(m.str());
        std::string stripped = detail::canonical_number(trim_view(tail));
        if (!stripped.empty()) return stripped;
        return std::nullopt;
    }
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), detail::number_pattern());
         it != std::sregex_iterator(); ++it) {
        last = it->str();
    }
    if (!last) return std::nullopt;
    return detail::canonical_number(*last);
}

/// What evaluate_prompt needs to know about the task.
struct TaskConfig {
    TaskType task_type = TaskType::classification;
    std::vector<std::string> label_set;
    std::string positive_label;
    double temperature = 0.0;

    static TaskConfig from_split(const DatasetSplit& split, double temperature) {
        return TaskConfig{split.task_type, split.label_set, split.positive_label, temperature};
    }
};

/// Task input as sent to the model: prompt, newline, example input.
inline std::string compose_task_input(std::string_view prompt_text, std::string_view input_text) {
    std::string out(prompt_text);
    out.push_back('\n');
    out.append(input_text);
    return out;
}

inline Prediction score_output(const Example& ex, std::string raw, const TaskConfig& task) {
    Prediction pred{ex.id, std::move(raw), std::nullopt, false};
    if (task.task_type == TaskType::math) {
        pred.parsed_label = parse_math_answer(pred.raw_output);
        const std::string gold = parse_math_answer(ex.label).value_or(trim(ex.label));
        pred.correct = pred.parsed_label && *pred.parsed_label == gold;
    } else {
        pred.parsed_label = parse_label(pred.raw_output, task.label_set);
        pred.correct = pred.parsed_label && detail::iequals(*pred.parsed_label, ex.label);
    }
    return pred;
}

/// Confusion counts against the positive label. Unparsed outputs count as
/// negative predictions.
inline ConfusionCounts confusion(const std::vector<Example>& examples, const std::vector<Prediction>& preds,
                                 const std::string& positive_label) {
    ConfusionCounts cc;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const bool gold = detail::iequals(examples[i].label, positive_label);
        const bool predicted = preds[i].parsed_label && detail::iequals(*preds[i].parsed_label, positive_label);
        if (gold && predicted) ++cc.tp;
        else if (!gold && predicted) ++cc.fp;
        else if (gold) ++cc.fn;
        else ++cc.tn;
    }
    return cc;
}

struct Evaluation {
    double score = 0.0;
    std::vector<Prediction> predictions;  // aligned with the input examples
    ConfusionCounts counts;               // classification only

    std::vector<bool> correctness() const {
        std::vector<bool> out;
        out.reserve(predictions.size());
        for (const auto& p : predictions) out.push_back(p.correct);
        return out;
    }
};

inline double score_predictions(const std::vector<Example>& examples, const std::vector<Prediction>& preds,
                                const TaskConfig& task, ConfusionCounts* counts_out = nullptr) {
    if (task.task_type == TaskType::math) {
        if (preds.empty()) return 0.0;
        long correct = 0;
        for (const auto& p : preds) correct += p.correct ? 1 : 0;
        return static_cast<double>(correct) / static_cast<double>(preds.size());
    }
    const auto cc = confusion(examples, preds, task.positive_label);
    if (counts_out) *counts_out = cc;
    return f1(cc);
}

namespace detail {

template <typename Err>
[[noreturn]] void rethrow_for_example(const Err& err, int example_id) {
    throw Err(std::string(err.what()) + " (example id " + std::to_string(example_id) + ")");
}

}  // namespace detail

/// The metric m: one task_eval call per example, F1 on the positive class
/// for classification, accuracy for math.
inline Evaluation evaluate_prompt(std::string_view prompt_text, const std::vector<Example>& examples,
                                  Gateway& gateway, const TaskConfig& task) {
    if (examples.empty()) throw Error("evaluate_prompt needs at least one example");
    Evaluation out;
    out.predictions.reserve(examples.size());
    for (const auto& ex : examples) {
        std::string raw;
        try {
            raw = gateway
                      .complete(LlmRequest::make(RoleTag::task_eval, compose_task_input(prompt_text, ex.input_text),
                                                 task.temperature))
                      .text;
        } catch (const CacheMissError& e) {
            detail::rethrow_for_example(e, ex.id);
        } catch (const ScriptExhaustedError& e) {
            detail::rethrow_for_example(e, ex.id);
        } catch (const NetworkError& e) {
            throw NetworkError(std::string(e.what()) + " (example id " + std::to_string(ex.id) + ")", e.status(),
                               e.retryable());
        }
        out.predictions.push_back(score_output(ex, std::move(raw), task));
    }
    out.score = score_predictions(examples, out.predictions, task, &out.counts);
    return out;
}

inline Evaluation evaluate_prompt(const Prompt& prompt, const std::vector<Example>& examples, Gateway& gateway,
                                  const TaskConfig& task) {
    return evaluate_prompt(prompt.text, examples, gateway, task);
}

}  // namespace mapo
