#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mapo/gateway.hpp"
#include "mapo/search.hpp"

namespace mapo {

namespace fs = std::filesystem;

namespace detail {

inline std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

template <typename Range>
void write_lines(const fs::path& path, const Range& items) {
    auto out = open_out(path);
    for (const auto& item : items) out << json(item).dump() << '\n';
}

inline void write_json(const fs::path& path, const json& value) { open_out(path) << value.dump(2) << '\n'; }

inline json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    return json::parse(in);
}

}  // namespace detail

/// Writes a run directory. Every file is a deterministic function of the
/// run result, the config echo, and the transcript.
///
///   config.json        resolved configuration
///   metadata.json      method label and the choices the run made
///   transcript.jsonl   request/response pairs
///   prompts.jsonl      every prompt with lineage and cached scores
///   gradients.jsonl    every generated gradient
///   beams.jsonl        B_0 .. B_r
///   history.json       gradient pools and momentum samples per round
///   bandit.jsonl       final (N, Q) table and pull log per selection
///   events.jsonl       one MetricEvent per round, round 0 first
///   convergence.json   ConvergenceReport
///   shortfalls.jsonl   non-fatal expansion shortfalls
///   summary.json       final prompt, counters, completion flag
///   predictions.jsonl  per-example predictions (verbose runs only)
inline void write_run_artifact(const fs::path& dir, const RunResult& result, const json& config_echo,
                               const Transcript& transcript) {
    fs::create_directories(dir);
    detail::write_json(dir / "config.json", config_echo);
    detail::write_json(dir / "metadata.json", result.metadata);
    transcript.save(dir / "transcript.jsonl");

    std::vector<Prompt> prompts;
    for (const auto& [id, p] : result.prompts) prompts.push_back(p);
    detail::write_lines(dir / "prompts.jsonl", prompts);
    detail::write_lines(dir / "gradients.jsonl", result.gradients);
    detail::write_lines(dir / "beams.jsonl", result.beams);
    detail::write_json(dir / "history.json", result.history);
    detail::write_lines(dir / "bandit.jsonl", result.bandit_tables);
    detail::write_lines(dir / "events.jsonl", result.events);
    detail::write_json(dir / "convergence.json", result.report ? json(*result.report) : json(nullptr));
    detail::write_lines(dir / "shortfalls.jsonl", result.shortfalls);
    if (!result.predictions.empty()) detail::write_lines(dir / "predictions.jsonl", result.predictions);

    json summary{{"complete", result.complete},
                 {"error", result.error},
                 {"method", result.metadata.value("method", "")},
                 {"optimize_calls", result.optimize_calls},
                 {"eval_calls", result.eval_calls},
                 {"final_selection_calls", result.final_selection_calls},
                 {"final_scores", result.final_scores},
                 {"best_prompt", result.best ? json(*result.best) : json(nullptr)}};
    detail::write_json(dir / "summary.json", summary);
}

/// What a report needs from a run directory.
struct ArtifactView {
    fs::path dir;
    std::string method;
    bool complete = false;
    std::vector<MetricEvent> events;
};

inline ArtifactView read_artifact(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("not an artifact directory: " + dir.string());
    if (!fs::exists(dir / "events.jsonl") || !fs::exists(dir / "summary.json")) {
        throw Error("artifact " + dir.string() + " has no events.jsonl/summary.json");
    }
    ArtifactView view;
    view.dir = dir;
    const auto summary = detail::read_json(dir / "summary.json");
    view.method = summary.value("method", dir.filename().string());
    view.complete = summary.value("complete", false);

    std::ifstream in(dir / "events.jsonl", std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (!trim_view(line).empty()) view.events.push_back(json::parse(line).get<MetricEvent>());
    }
    if (view.events.empty()) throw Error("artifact " + dir.string() + " has no events");
    return view;
}

template <typename T>
std::vector<T> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<T> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim_view(line).empty()) out.push_back(json::parse(line).get<T>());
    }
    return out;
}

}  // namespace mapo
