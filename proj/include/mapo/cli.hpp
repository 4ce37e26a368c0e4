#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mapo/artifacts.hpp"
#include "mapo/config_file.hpp"
#include "mapo/live_backend.hpp"
#include "mapo/report.hpp"
#include "mapo/search.hpp"
#include "mapo/synthetic.hpp"

namespace mapo::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDatasetError = 3,
    kGatewayError = 4,
    kIncompleteRun = 5,
};

/// Command-line overrides shared by optimize and evaluate.
struct Overrides {
    std::string config;
    std::string mode;
    std::string gradient_mode;
    std::string momentum;
    std::string backend;
    std::string transcript;
    std::string script;
    std::string out;
    std::string templates;
    std::string seed_prompt;
    std::optional<long long> seed;
    bool verbose = false;
};

inline void add_override_flags(CLI::App& cmd, Overrides& o) {
    cmd.add_option("--config", o.config, "Run configuration (INI)")->required();
    cmd.add_option("--mode", o.mode, "mapo | protegi");
    cmd.add_option("--gradient-mode", o.gradient_mode, "positive_only | negative_only | both");
    cmd.add_option("--momentum", o.momentum, "on | off");
    cmd.add_option("--backend", o.backend, "live | replay | scripted");
    cmd.add_option("--transcript", o.transcript, "Replay source, or where to also save the recorded transcript");
    cmd.add_option("--script", o.script, "Scripted responses (JSONL)");
    cmd.add_option("--seed", o.seed, "RNG seed");
    cmd.add_option("--out", o.out, "Artifact directory");
    cmd.add_option("--templates", o.templates, "Directory with tau.txt/alpha.txt/... overrides");
    cmd.add_option("--seed-prompt", o.seed_prompt, "Seed prompt text");
    cmd.add_flag("--verbose", o.verbose, "Write per-example predictions");
}

inline AppConfig resolve_config(const Overrides& o) {
    AppConfig cfg = load_config(o.config);
    if (!o.mode.empty()) apply_setting(cfg, "run", "mode", o.mode);
    if (!o.gradient_mode.empty()) apply_setting(cfg, "run", "gradient_mode", o.gradient_mode);
    if (!o.momentum.empty()) apply_setting(cfg, "run", "momentum", o.momentum);
    if (o.seed) apply_setting(cfg, "run", "seed", std::to_string(*o.seed));
    if (!o.seed_prompt.empty()) {
        cfg.seed_prompt = o.seed_prompt;
        cfg.seed_prompt_file.clear();
    }
    if (!o.templates.empty()) cfg.templates_dir = o.templates;
    if (!o.backend.empty()) apply_setting(cfg, "backend", "kind", o.backend);
    if (!o.transcript.empty()) cfg.backend.transcript = o.transcript;
    if (!o.script.empty()) cfg.backend.script = o.script;
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.verbose) cfg.verbose = true;
    validate_config(cfg.run);
    return cfg;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

inline std::string seed_prompt_text(const AppConfig& cfg) {
    std::string text = cfg.seed_prompt_file.empty() ? cfg.seed_prompt : read_text_file(cfg.seed_prompt_file);
    if (trim_view(text).empty()) throw ConfigError("seed prompt is empty (set run.seed_prompt or run.seed_prompt_file)");
    return text;
}

/// Gateway for the configured backend. The scripted backend answers from an
/// optional script first and falls back to the synthetic model built from
/// the dataset.
inline std::unique_ptr<Gateway> make_gateway(const AppConfig& cfg) {
    const auto& b = cfg.backend;
    RetryPolicy retry({.max_retries = b.max_retries, .base_delay_s = b.retry_base_s, .seed = cfg.run.rng_seed});
    if (b.kind == "live") {
        LiveOptions live;
        live.url = b.url;
        live.model = b.model;
        live.timeout_s = b.timeout_s;
        if (const char* key = std::getenv(b.api_key_env.c_str())) live.api_key = key;
        return std::make_unique<Gateway>(std::make_unique<LiveBackend>(live), std::move(retry));
    }
    if (b.kind == "replay") {
        if (b.transcript.empty()) throw ConfigError("replay backend needs a transcript path");
        return std::make_unique<Gateway>(std::make_unique<ReplayBackend>(Transcript::load(b.transcript)));
    }
    auto world = synthetic::World::from_examples(load_examples(cfg.dataset.path, cfg.dataset.format),
                                                 cfg.dataset.labels);
    auto scripted = std::make_unique<ScriptedBackend>(synthetic::responder(std::move(world)), b.latency_s);
    if (!b.script.empty()) scripted->load_script(b.script);
    return std::make_unique<Gateway>(std::move(scripted));
}

inline json config_echo(const AppConfig& cfg) {
    return json{{"run", cfg.run},
                {"dataset", json{{"path", cfg.dataset.path},
                                 {"format", cfg.dataset.format},
                                 {"task_type", cfg.dataset.task_type},
                                 {"positive_label", cfg.dataset.positive_label},
                                 {"labels", cfg.dataset.labels}}},
                {"backend", json{{"kind", cfg.backend.kind},
                                 {"url", cfg.backend.url},
                                 {"model", cfg.backend.model},
                                 {"api_key_env", cfg.backend.api_key_env},
                                 {"latency_s", cfg.backend.latency_s}}},
                {"seed_prompt", cfg.seed_prompt},
                {"seed_prompt_file", cfg.seed_prompt_file},
                {"templates_dir", cfg.templates_dir}};
}

inline int optimize(const AppConfig& cfg, std::ostream& out) {
    const auto seed_text = seed_prompt_text(cfg);
    const auto split = load_split(cfg.dataset, cfg.run.test_set_size, cfg.run.rng_seed);
    RunOptions options{.templates = cfg.templates_dir.empty() ? TemplateSet{}
                                                              : TemplateSet::with_overrides(cfg.templates_dir),
                       .verbose = cfg.verbose};
    auto gateway = make_gateway(cfg);
    const auto result = run_search(seed_text, split, cfg.run, *gateway, std::move(options));

    const auto transcript = gateway->transcript();
    write_run_artifact(cfg.out_dir, result, config_echo(cfg), transcript);
    {
        std::ofstream ini(std::filesystem::path(cfg.out_dir) / "config.ini", std::ios::binary);
        ini << to_ini(cfg);
    }
    if (!cfg.backend.transcript.empty() && cfg.backend.kind != "replay") transcript.save(cfg.backend.transcript);

    out << "method: " << method_name(cfg.run) << "\n";
    out << "artifact: " << cfg.out_dir << "\n";
    out << "optimize_calls: " << result.optimize_calls << "\neval_calls: " << result.eval_calls << "\n";
    if (result.best) {
        out << "best_prompt_id: " << result.best->id.value << "\n";
        out << "best_test_score: " << result.best->test_score.value_or(0.0) << "\n";
        out << "best_prompt:\n" << result.best->text << "\n";
    }
    if (result.report) {
        const auto& r = *result.report;
        out << "convergence: target=" << r.target_score << " reached=" << (r.reached ? "yes" : "no");
        if (r.reached) {
            out << " time_s=" << *r.convergence_time_s << " calls=" << *r.convergence_calls
                << " steps=" << *r.convergence_steps;
        }
        out << "\n";
    }
    if (!result.complete) {
        out << "run incomplete: " << result.error << "\n";
        return kIncompleteRun;
    }
    return kOk;
}

inline int evaluate(const AppConfig& cfg, const std::string& prompt_file, std::ostream& out) {
    const std::string text = read_text_file(prompt_file);
    if (trim_view(text).empty()) throw ConfigError("prompt file is empty: " + prompt_file);
    const auto split = load_split(cfg.dataset, cfg.run.test_set_size, cfg.run.rng_seed);
    auto gateway = make_gateway(cfg);
    const auto eval = evaluate_prompt(trim(text), split.test, *gateway, TaskConfig::from_split(split, cfg.run.temperature));
    out << "score: " << eval.score << "\n";
    out << "examples: " << split.test.size() << "\n";
    out << "calls: " << gateway->call_count() << "\n";
    return kOk;
}

/// Runs the CLI on `args` (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Momentum-aided prompt optimization"};
    app.require_subcommand(1);

    Overrides opt_flags;
    auto* optimize_cmd = app.add_subcommand("optimize", "Run beam search from a seed prompt");
    add_override_flags(*optimize_cmd, opt_flags);

    Overrides eval_flags;
    std::string prompt_file;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a fixed prompt on the test split");
    add_override_flags(*evaluate_cmd, eval_flags);
    evaluate_cmd->add_option("--prompt", prompt_file, "File holding the prompt text")->required();

    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* report_cmd = app.add_subcommand("report", "Write score-vs-round/time/calls CSVs for run artifacts");
    report_cmd->add_option("artifacts", report_dirs, "Artifact directories")->required();
    report_cmd->add_option("--out", report_out, "Output directory");

    std::string replay_dir;
    std::string replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run an artifact from its own config and transcript");
    replay_cmd->add_option("artifact", replay_dir, "Artifact directory")->required();
    replay_cmd->add_option("--out", replay_out, "Output directory")->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*optimize_cmd) return optimize(resolve_config(opt_flags), out);
        if (*evaluate_cmd) return evaluate(resolve_config(eval_flags), prompt_file, out);
        if (*replay_cmd) {
            const std::filesystem::path dir(replay_dir);
            Overrides o;
            o.config = (dir / "config.ini").string();
            o.backend = "replay";
            o.transcript = (dir / "transcript.jsonl").string();
            o.out = replay_out;
            return optimize(resolve_config(o), out);
        }
        if (*report_cmd) {
            const auto files = write_report({report_dirs.begin(), report_dirs.end()}, report_out);
            for (const auto& w : files.warnings) err << "warning: " << w << "\n";
            for (const auto& f : files.written) out << f.string() << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DatasetError& e) {
        err << "dataset error: " << e.what() << "\n";
        return kDatasetError;
    } catch (const GatewayError& e) {
        err << "gateway error: " << e.what() << "\n";
        return kGatewayError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}

}  // namespace mapo::cli
