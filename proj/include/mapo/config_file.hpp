#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mapo/core.hpp"
#include "mapo/datasets.hpp"

namespace mapo {

struct BackendConfig {
    std::string kind = "scripted";  // live | replay | scripted
    std::string transcript;         // replay source, or record destination
    std::string script;             // scripted: optional JSONL script
    std::string url = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 5;
    double retry_base_s = 1.0;
    double timeout_s = 60.0;
    double latency_s = 0.0;  // simulated seconds per scripted call
};

/// Everything an invocation needs: the search config plus data, backend,
/// and output settings.
struct AppConfig {
    RunConfig run;
    DatasetDescriptor dataset;
    BackendConfig backend;
    std::string seed_prompt;
    std::string seed_prompt_file;
    std::string templates_dir;
    std::string out_dir = "mapo_run";
    bool verbose = false;
};

namespace detail {

inline bool parse_bool(const std::string& raw, const std::string& field) {
    const auto v = trim(raw);
    if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
    if (v == "off" || v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean '" + v + "' for " + field);
}

inline int parse_int(const std::string& raw, const std::string& field) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(raw, &used);
        if (trim_view(std::string_view(raw).substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid integer '" + raw + "' for " + field);
}

inline double parse_double(const std::string& raw, const std::string& field) {
    try {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (trim_view(std::string_view(raw).substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid number '" + raw + "' for " + field);
}

inline std::string unquote(std::string v) {
    v = trim(v);
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
        v = v.substr(1, v.size() - 2);
    }
    return v;
}

inline std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (auto t = trim(item); !t.empty()) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace detail

/// Applies one `section.key = value` setting. Unknown keys are errors.
inline void apply_setting(AppConfig& cfg, const std::string& section, const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string field = section + "." + key;
    const std::string value = unquote(raw);
    auto& run = cfg.run;
    if (section == "run") {
        if (key == "mode") {
            if (value == "protegi") {
                run.baseline_mode = true;
                run.gradient_mode = GradientMode::negative_only;
                run.momentum_enabled = false;
            } else if (value == "mapo") {
                run.baseline_mode = false;
            } else {
                throw ConfigError("invalid mode '" + value + "' (mapo | protegi)");
            }
        } else if (key == "beam_width") run.beam_width = parse_int(value, field);
        else if (key == "search_depth") run.search_depth = parse_int(value, field);
        else if (key == "minibatch_size") run.minibatch_size = parse_int(value, field);
        else if (key == "candidates_per_parent") run.candidates_per_parent = parse_int(value, field);
        else if (key == "num_gradients") run.num_gradients = parse_int(value, field);
        else if (key == "num_correct_examples") run.num_correct_examples = parse_int(value, field);
        else if (key == "temperature") run.temperature = parse_double(value, field);
        else if (key == "test_set_size") run.test_set_size = parse_int(value, field);
        else if (key == "gradient_mode") run.gradient_mode = enum_from_string<GradientMode>(value, field);
        else if (key == "momentum") run.momentum_enabled = parse_bool(value, field);
        else if (key == "seed") run.rng_seed = static_cast<std::uint64_t>(parse_int(value, field));
        else if (key == "parent_retention") run.parent_retention = parse_bool(value, field);
        else if (key == "full_beam_test_eval") run.full_beam_test_eval = parse_bool(value, field);
        else if (key == "history_strategy") run.history_strategy = enum_from_string<HistoryStrategy>(value, field);
        else if (key == "paraphrases_per_parent") run.paraphrases_per_parent = parse_int(value, field);
        else if (key == "target_score") {
            if (value.empty()) run.target_score.reset();
            else run.target_score = parse_double(value, field);
        }
        else if (key == "seed_prompt") cfg.seed_prompt = value;
        else if (key == "seed_prompt_file") cfg.seed_prompt_file = value;
        else if (key == "templates_dir") cfg.templates_dir = value;
        else throw ConfigError("unknown setting " + field);
    } else if (section == "bandit") {
        if (key == "time_steps") run.bandit.time_steps = parse_int(value, field);
        else if (key == "sample_size") run.bandit.sample_size = parse_int(value, field);
        else if (key == "exploration") run.bandit.exploration = parse_double(value, field);
        else if (key == "update") run.bandit.update = enum_from_string<BanditUpdate>(value, field);
        else throw ConfigError("unknown setting " + field);
    } else if (section == "dataset") {
        if (key == "path") cfg.dataset.path = value;
        else if (key == "format") cfg.dataset.format = enum_from_string<DataFormat>(value, field);
        else if (key == "task_type") cfg.dataset.task_type = enum_from_string<TaskType>(value, field);
        else if (key == "positive_label") cfg.dataset.positive_label = value;
        else if (key == "labels") cfg.dataset.labels = split_list(value);
        else throw ConfigError("unknown setting " + field);
    } else if (section == "backend") {
        auto& b = cfg.backend;
        if (key == "kind") {
            if (value != "live" && value != "replay" && value != "scripted") {
                throw ConfigError("invalid backend '" + value + "' (live | replay | scripted)");
            }
            b.kind = value;
        }
        else if (key == "transcript") b.transcript = value;
        else if (key == "script") b.script = value;
        else if (key == "url") b.url = value;
        else if (key == "model") b.model = value;
        else if (key == "api_key_env") b.api_key_env = value;
        else if (key == "max_retries") b.max_retries = parse_int(value, field);
        else if (key == "retry_base_s") b.retry_base_s = parse_double(value, field);
        else if (key == "timeout_s") b.timeout_s = parse_double(value, field);
        else if (key == "latency_s") b.latency_s = parse_double(value, field);
        else throw ConfigError("unknown setting " + field);
    } else if (section == "output") {
        if (key == "dir") cfg.out_dir = value;
        else if (key == "verbose") cfg.verbose = parse_bool(value, field);
        else throw ConfigError("unknown setting " + field);
    } else {
        throw ConfigError("unknown section [" + section + "]");
    }
}

/// Reads an INI-style config. Relative paths are resolved against the
/// config file's directory and stored as absolute paths.
inline AppConfig load_config(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& ex) {
        throw ConfigError(ex.what());
    }
    AppConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty()) throw ConfigError("setting '" + section + "' is outside a section");
            continue;
        }
        for (const auto& [key, value] : body) apply_setting(cfg, section, key, value.data());
    }
    const auto base = path.parent_path();
    const auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = std::filesystem::absolute(base / p).lexically_normal().string();
        }
    };
    resolve(cfg.dataset.path);
    resolve(cfg.seed_prompt_file);
    resolve(cfg.templates_dir);
    resolve(cfg.backend.script);
    resolve(cfg.backend.transcript);
    return cfg;
}

inline std::string format_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

/// INI text that load_config reads back to the same configuration
/// (with absolute paths). Secrets are never written, only the variable name.
inline std::string to_ini(const AppConfig& cfg) {
    const auto& r = cfg.run;
    const auto b = [](bool v) { return v ? "on" : "off"; };
    const auto q = [](const std::string& s) { return "\"" + s + "\""; };
    std::ostringstream out;
    out << "[run]\n"
        << "mode = " << (r.baseline_mode ? "protegi" : "mapo") << "\n"
        << "beam_width = " << r.beam_width << "\n"
        << "search_depth = " << r.search_depth << "\n"
        << "minibatch_size = " << r.minibatch_size << "\n"
        << "candidates_per_parent = " << r.candidates_per_parent << "\n"
        << "num_gradients = " << r.num_gradients << "\n"
        << "num_correct_examples = " << r.num_correct_examples << "\n"
        << "temperature = " << format_number(r.temperature) << "\n"
        << "test_set_size = " << r.test_set_size << "\n"
        << "gradient_mode = " << to_string(r.gradient_mode) << "\n"
        << "momentum = " << b(r.momentum_enabled) << "\n"
        << "seed = " << r.rng_seed << "\n"
        << "parent_retention = " << b(r.parent_retention) << "\n"
        << "full_beam_test_eval = " << b(r.full_beam_test_eval) << "\n"
        << "history_strategy = " << to_string(r.history_strategy) << "\n"
        << "paraphrases_per_parent = " << r.paraphrases_per_parent << "\n"
        << "target_score = " << (r.target_score ? format_number(*r.target_score) : "") << "\n"
        << "seed_prompt = " << q(cfg.seed_prompt) << "\n"
        << "seed_prompt_file = " << q(cfg.seed_prompt_file) << "\n"
        << "templates_dir = " << q(cfg.templates_dir) << "\n\n"
        << "[bandit]\n"
        << "time_steps = " << r.bandit.time_steps << "\n"
        << "sample_size = " << r.bandit.sample_size << "\n"
        << "exploration = " << format_number(r.bandit.exploration) << "\n"
        << "update = " << to_string(r.bandit.update) << "\n\n"
        << "[dataset]\n"
        << "path = " << q(cfg.dataset.path) << "\n"
        << "format = " << to_string(cfg.dataset.format) << "\n"
        << "task_type = " << to_string(cfg.dataset.task_type) << "\n"
        << "positive_label = " << q(cfg.dataset.positive_label) << "\n"
        << "labels = ";
    for (std::size_t i = 0; i < cfg.dataset.labels.size(); ++i) out << (i ? "," : "") << cfg.dataset.labels[i];
    out << "\n\n"
        << "[backend]\n"
        << "kind = " << cfg.backend.kind << "\n"
        << "transcript = " << q(cfg.backend.transcript) << "\n"
        << "script = " << q(cfg.backend.script) << "\n"
        << "url = " << q(cfg.backend.url) << "\n"
        << "model = " << q(cfg.backend.model) << "\n"
        << "api_key_env = " << cfg.backend.api_key_env << "\n"
        << "max_retries = " << cfg.backend.max_retries << "\n"
        << "retry_base_s = " << format_number(cfg.backend.retry_base_s) << "\n"
        << "timeout_s = " << format_number(cfg.backend.timeout_s) << "\n"
        << "latency_s = " << format_number(cfg.backend.latency_s) << "\n\n"
        << "[output]\n"
        << "dir = " << q(cfg.out_dir) << "\n"
        << "verbose = " << b(cfg.verbose) << "\n";
    return out.str();
}

}  // namespace mapo
