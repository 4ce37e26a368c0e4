#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mapo/artifacts.hpp"

namespace mapo {

namespace detail {

/// Shortest round-trip decimal, no locale.
inline std::string csv_number(double value) {
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

}  // namespace detail

struct ReportFiles {
    std::vector<fs::path> written;
    std::vector<std::string> warnings;
};

/// Per artifact: <label>_score_vs_round.csv, _score_vs_time.csv,
/// _score_vs_calls.csv; plus comparison.csv keyed by round with one column
/// per method label. Labels are method names, suffixed with the directory
/// name when two artifacts share a method.
inline ReportFiles write_report(const std::vector<fs::path>& artifact_dirs, const fs::path& out_dir) {
    if (artifact_dirs.empty()) throw Error("report needs at least one artifact directory");
    std::vector<ArtifactView> views;
    for (const auto& dir : artifact_dirs) views.push_back(read_artifact(dir));

    std::map<std::string, int> method_counts;
    for (const auto& v : views) ++method_counts[v.method];
    std::vector<std::string> labels;
    std::set<std::string> used;
    for (const auto& v : views) {
        std::string label = method_counts[v.method] > 1 ? v.method + "@" + v.dir.filename().string() : v.method;
        while (!used.insert(label).second) label += "_";
        labels.push_back(label);
    }

    ReportFiles files;
    fs::create_directories(out_dir);
    const auto open = [&](const std::string& name) {
        const auto path = out_dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        files.written.push_back(path);
        return out;
    };

    std::set<int> rounds;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        if (!v.complete) files.warnings.push_back("artifact " + v.dir.string() + " is incomplete; curves are partial");
        {
            auto out = open(labels[i] + "_score_vs_round.csv");
            out << "round,best_test_score\n";
            for (const auto& e : v.events) out << e.round << ',' << detail::csv_number(e.best_test_score) << '\n';
        }
        {
            auto out = open(labels[i] + "_score_vs_time.csv");
            out << "elapsed_s,best_test_score\n";
            for (const auto& e : v.events) {
                out << detail::csv_number(e.elapsed_s) << ',' << detail::csv_number(e.best_test_score) << '\n';
            }
        }
        {
            auto out = open(labels[i] + "_score_vs_calls.csv");
            out << "total_calls,optimize_calls,eval_calls,best_test_score\n";
            for (const auto& e : v.events) {
                out << e.total_calls() << ',' << e.optimize_calls << ',' << e.eval_calls << ','
                    << detail::csv_number(e.best_test_score) << '\n';
            }
        }
        for (const auto& e : v.events) rounds.insert(e.round);
    }

    auto out = open("comparison.csv");
    out << "round";
    for (const auto& label : labels) out << ',' << label;
    out << '\n';
    for (const int round : rounds) {
        out << round;
        for (const auto& v : views) {
            out << ',';
            for (const auto& e : v.events) {
                if (e.round == round) {
                    out << detail::csv_number(e.best_test_score);
                    break;
                }
            }
        }
        out << '\n';
    }
    return files;
}

}  // namespace mapo
