#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/rng.hpp"

namespace mapo {

struct Example {
    int id = 0;
    std::string input_text;
    std::string label;

    bool operator==(const Example&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Example, id, input_text, label)

struct DatasetSplit {
    std::vector<Example> train;
    std::vector<Example> test;
    std::string positive_label;
    std::vector<std::string> label_set;
    TaskType task_type = TaskType::classification;
};

enum class DataFormat { tsv, jsonl };

NLOHMANN_JSON_SERIALIZE_ENUM(DataFormat, {{DataFormat::tsv, "tsv"}, {DataFormat::jsonl, "jsonl"}})

/// Where a dataset lives and how to score it.
struct DatasetDescriptor {
    std::string path;
    DataFormat format = DataFormat::tsv;
    TaskType task_type = TaskType::classification;
    std::string positive_label;           // classification only; defaults to the first label
    std::vector<std::string> labels;      // verbalizers; defaults to distinct labels in file order
};

enum class Correctness { correct, incorrect };

NLOHMANN_JSON_SERIALIZE_ENUM(Correctness, {{Correctness::correct, "correct"}, {Correctness::incorrect, "incorrect"}})

struct ExampleSample {
    std::vector<Example> examples;
    Correctness correctness = Correctness::correct;
    bool shortfall = false;  // fewer matching examples than requested
};

namespace detail {

inline Example make_example(int id, std::string_view input, std::string_view label, std::size_t lineno) {
    Example ex{id, std::string(input), trim(label)};
    if (trim_view(ex.input_text).empty()) throw DatasetError("line " + std::to_string(lineno) + ": empty input text");
    if (ex.label.empty()) throw DatasetError("line " + std::to_string(lineno) + ": empty label");
    return ex;
}

inline std::string json_label(const json& value) {
    return value.is_string() ? value.get<std::string>() : value.dump();
}

}  // namespace detail

/// Reads `path`. Ids follow file order; blank lines are skipped.
/// TSV lines are `input<TAB>label` (split at the last tab). JSONL objects
/// carry "text"/"label", with "question"/"answer" accepted as aliases.
inline std::vector<Example> load_examples(const std::filesystem::path& path, DataFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open dataset " + path.string());
    std::vector<Example> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_view(line).empty()) continue;
        const int id = static_cast<int>(out.size());
        if (format == DataFormat::tsv) {
            const auto tab = line.rfind('\t');
            if (tab == std::string::npos) {
                throw DatasetError(path.string() + " line " + std::to_string(lineno) + ": missing tab separator");
            }
            out.push_back(detail::make_example(id, std::string_view(line).substr(0, tab),
                                               std::string_view(line).substr(tab + 1), lineno));
        } else {
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::exception& ex) {
                throw DatasetError(path.string() + " line " + std::to_string(lineno) + ": " + ex.what());
            }
            const char* text_key = obj.contains("text") ? "text" : "question";
            const char* label_key = obj.contains("label") ? "label" : "answer";
            if (!obj.is_object() || !obj.contains(text_key) || !obj.contains(label_key) ||
                !obj.at(text_key).is_string()) {
                throw DatasetError(path.string() + " line " + std::to_string(lineno) + ": needs text and label");
            }
            out.push_back(detail::make_example(id, obj.at(text_key).get<std::string>(),
                                               detail::json_label(obj.at(label_key)), lineno));
        }
    }
    if (out.empty()) throw DatasetError("empty dataset " + path.string());
    return out;
}

/// Distinct labels in first-seen order.
inline std::vector<std::string> distinct_labels(const std::vector<Example>& examples) {
    std::vector<std::string> labels;
    std::set<std::string> seen;
    for (const auto& ex : examples) {
        if (seen.insert(ex.label).second) labels.push_back(ex.label);
    }
    return labels;
}

/// Draws the test split uniformly without replacement; everything else is train.
inline DatasetSplit make_split(const std::vector<Example>& examples, int test_set_size, std::uint64_t seed) {
    if (test_set_size < 1) throw DatasetError("test_set_size must be positive");
    if (examples.size() <= static_cast<std::size_t>(test_set_size)) {
        throw DatasetError("dataset-too-small: " + std::to_string(examples.size()) +
                           " examples cannot provide a test split of " + std::to_string(test_set_size) +
                           " plus training data");
    }
    auto engine = rng::stream(seed, rng::Stream::split);
    const auto picked = rng::sample_indices(examples.size(), static_cast<std::size_t>(test_set_size), engine);
    std::vector<bool> in_test(examples.size(), false);
    for (const auto idx : picked) in_test[idx] = true;
    DatasetSplit split;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (in_test[i] ? split.test : split.train).push_back(examples[i]);
    }
    split.label_set = distinct_labels(examples);
    if (!split.label_set.empty()) split.positive_label = split.label_set.front();
    return split;
}

/// Loads and splits a described dataset, applying its label configuration.
inline DatasetSplit load_split(const DatasetDescriptor& desc, int test_set_size, std::uint64_t seed) {
    DatasetSplit split = make_split(load_examples(desc.path, desc.format), test_set_size, seed);
    split.task_type = desc.task_type;
    if (!desc.labels.empty()) split.label_set = desc.labels;
    if (!desc.positive_label.empty()) split.positive_label = desc.positive_label;
    else if (!split.label_set.empty()) split.positive_label = split.label_set.front();
    return split;
}

/// `size` training examples for `round`; without replacement when the
/// training set is large enough, with replacement otherwise.
inline std::vector<Example> sample_examples(const std::vector<Example>& pool, int size, rng::Engine& engine) {
    if (pool.empty()) throw DatasetError("cannot sample from an empty training set");
    const auto n = static_cast<std::size_t>(size);
    const auto idx = pool.size() >= n ? rng::sample_indices(pool.size(), n, engine)
                                      : rng::draw_indices(pool.size(), n, engine);
    std::vector<Example> out;
    out.reserve(idx.size());
    for (const auto i : idx) out.push_back(pool[i]);
    return out;
}

inline std::vector<Example> sample_minibatch(const DatasetSplit& split, int size, std::uint64_t seed, int round) {
    auto engine = rng::stream(seed, rng::Stream::minibatch, {static_cast<std::uint64_t>(round)});
    return sample_examples(split.train, size, engine);
}

/// Up to `n` examples whose correctness matches `want`. `salt` separates
/// streams for different parents within one round.
inline ExampleSample sample_by_correctness(const std::vector<Example>& minibatch,
                                           const std::vector<bool>& correct, int n, Correctness want,
                                           std::uint64_t seed, int round, std::uint64_t salt = 0) {
    if (correct.size() != minibatch.size()) throw Error("correctness flags do not cover the minibatch");
    std::vector<Example> matching;
    for (std::size_t i = 0; i < minibatch.size(); ++i) {
        if (correct[i] == (want == Correctness::correct)) matching.push_back(minibatch[i]);
    }
    ExampleSample out;
    out.correctness = want;
    const auto wanted = static_cast<std::size_t>(n);
    if (matching.size() <= wanted) {
        out.shortfall = matching.size() < wanted;
        out.examples = std::move(matching);
        return out;
    }
    auto engine = rng::stream(seed, rng::Stream::correct_sample,
                              {static_cast<std::uint64_t>(round), salt, static_cast<std::uint64_t>(want)});
    for (const auto i : rng::sample_indices(matching.size(), wanted, engine)) out.examples.push_back(matching[i]);
    return out;
}

}  // namespace mapo
