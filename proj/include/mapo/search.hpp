#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapo/bandit.hpp"
#include "mapo/core.hpp"
#include "mapo/datasets.hpp"
#include "mapo/gateway.hpp"
#include "mapo/gradient_engine.hpp"
#include "mapo/momentum.hpp"
#include "mapo/scoring.hpp"
#include "mapo/templates.hpp"

namespace mapo {

// ---------------------------------------------------------------------------
// Telemetry
// ---------------------------------------------------------------------------

/// One row of the score-vs-round/time/calls curves. Counters are cumulative.
struct MetricEvent {
    int round = 0;
    double elapsed_s = 0.0;
    long optimize_calls = 0;
    long eval_calls = 0;
    std::optional<double> best_train_score;  // absent for the round-0 seed row
    double best_test_score = 0.0;
    PromptId best_prompt_id;

    long total_calls() const { return optimize_calls + eval_calls; }
    bool operator==(const MetricEvent&) const = default;
};

inline void to_json(json& j, const MetricEvent& e) {
    j = json{{"round", e.round},
             {"elapsed_s", e.elapsed_s},
             {"optimize_calls", e.optimize_calls},
             {"eval_calls", e.eval_calls},
             {"best_train_score", e.best_train_score ? json(*e.best_train_score) : json(nullptr)},
             {"best_test_score", e.best_test_score},
             {"best_prompt_id", e.best_prompt_id}};
}

inline void from_json(const json& j, MetricEvent& e) {
    e.round = j.at("round").get<int>();
    e.elapsed_s = j.at("elapsed_s").get<double>();
    e.optimize_calls = j.at("optimize_calls").get<long>();
    e.eval_calls = j.at("eval_calls").get<long>();
    e.best_train_score = detail::optional_field<double>(j, "best_train_score");
    e.best_test_score = j.at("best_test_score").get<double>();
    e.best_prompt_id = j.at("best_prompt_id").get<PromptId>();
}

struct ConvergenceReport {
    double target_score = 0.0;
    bool reached = false;
    std::optional<double> convergence_time_s;
    std::optional<long> convergence_calls;
    std::optional<int> convergence_steps;
};

inline void to_json(json& j, const ConvergenceReport& r) {
    j = json{{"target_score", r.target_score},
             {"reached", r.reached},
             {"convergence_time_s", r.convergence_time_s ? json(*r.convergence_time_s) : json(nullptr)},
             {"convergence_calls", r.convergence_calls ? json(*r.convergence_calls) : json(nullptr)},
             {"convergence_steps", r.convergence_steps ? json(*r.convergence_steps) : json(nullptr)}};
}

/// First event whose test score reaches `target_score` fixes time, calls
/// (optimize + eval) and steps (its round).
inline ConvergenceReport detect_convergence(std::span<const MetricEvent> events, double target_score) {
    if (events.empty()) throw Error("detect_convergence needs at least one event");
    ConvergenceReport report;
    report.target_score = target_score;
    for (const auto& e : events) {
        if (e.best_test_score >= target_score) {
            report.reached = true;
            report.convergence_time_s = e.elapsed_s;
            report.convergence_calls = e.total_calls();
            report.convergence_steps = e.round;
            break;
        }
    }
    return report;
}

/// Optimization calls of search round `round` (1-based) when nothing falls
/// short: parent minibatch evaluation, expansion, and bandit pulls.
inline long expected_calls_per_round(const RunConfig& cfg, int round) {
    const long parents = round <= 1 ? 1 : cfg.beam_width;
    const auto quota = gradient_quota(cfg);
    const long tau_calls = (quota.positive > 0 ? 1 : 0) + (quota.negative > 0 ? 1 : 0);
    const long paraphrases = cfg.baseline_mode ? cfg.paraphrases_per_parent : 0;
    const long expansion = cfg.candidates_per_parent == 0 ? 0 : parents * (tau_calls + cfg.candidates_per_parent + paraphrases);
    return parents * cfg.minibatch_size + expansion +
           static_cast<long>(cfg.bandit.time_steps) * cfg.bandit.sample_size;
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

struct BanditTable {
    int round = 0;  // the beam round this selection produced
    BanditOutcome outcome;
};

inline void to_json(json& j, const BanditTable& t) {
    json selected = json::array();
    for (const auto idx : t.outcome.selected) selected.push_back(t.outcome.arms[idx].prompt_id);
    j = json{{"round", t.round}, {"arms", t.outcome.arms}, {"selected", selected}, {"pulls", t.outcome.pulls}};
}

struct FinalScore {
    PromptId prompt_id;
    double score = 0.0;
};

inline void to_json(json& j, const FinalScore& f) { j = json{{"prompt_id", f.prompt_id}, {"score", f.score}}; }

/// Predictions from one evaluation, kept only when verbose.
struct PredictionBatch {
    int round = 0;
    PromptId prompt_id;
    std::string split;  // minibatch | test
    std::vector<Prediction> predictions;
};

inline void to_json(json& j, const PredictionBatch& b) {
    j = json{{"round", b.round}, {"prompt_id", b.prompt_id}, {"split", b.split}, {"predictions", b.predictions}};
}

struct RunResult {
    bool complete = false;
    std::string error;
    std::optional<Prompt> best;
    std::vector<MetricEvent> events;
    std::optional<ConvergenceReport> report;
    PromptStore prompts;
    std::vector<Beam> beams;
    std::vector<Gradient> gradients;
    GradientHistory history;
    std::vector<BanditTable> bandit_tables;
    std::vector<Shortfall> shortfalls;
    std::vector<FinalScore> final_scores;
    long final_selection_calls = 0;
    long optimize_calls = 0;
    long eval_calls = 0;
    std::vector<PredictionBatch> predictions;
    json metadata;
};

struct RunOptions {
    TemplateSet templates;
    bool verbose = false;
};

/// Label for reports: "mapo"/"protegi" plus any non-default ablation.
inline std::string method_name(const RunConfig& cfg) {
    if (cfg.baseline_mode) return "protegi";
    std::string name = "mapo";
    if (cfg.gradient_mode != GradientMode::positive_only) name += "-" + to_string(cfg.gradient_mode);
    if (!cfg.momentum_enabled) name += "-nomomentum";
    return name;
}

inline json run_metadata(const RunConfig& cfg) {
    const auto quota = gradient_quota(cfg);
    return json{
        {"method", method_name(cfg)},
        {"minibatch_policy", "one minibatch per round, shared by all parents, drawn on the (seed, round) stream"},
        {"history_binding", "history slot bound to \"(none)\" when momentum is off or no sample exists"},
        {"history_strategy", cfg.history_strategy},
        {"negative_templates", "tau/alpha mirrored: 'correct' -> 'wrong', 'strengths' -> 'weaknesses/reasons the prompt failed'"},
        {"gradient_apportionment", json{{"positive", quota.positive}, {"negative", quota.negative}}},
        {"edit_diversity", "each edit call appends 'Variant j of k' to the rendered template"},
        {"parent_retention", cfg.parent_retention},
        {"bandit", cfg.bandit},
        {"bandit_defaults_note", "time_steps/sample_size/exploration defaults are not from the published setup"},
        {"best_on_train", "beam member with the highest mean bandit reward; ties to lowest id"},
        {"test_eval", cfg.full_beam_test_eval ? "every beam member" : "best-on-train beam member only"},
        {"final_selection", "argmax over the final beam on a fresh minibatch"},
        {"api_call_counting", "every backend attempt counts; optimize_calls and eval_calls reported separately"},
        {"api_calls_plotted", "score_vs_calls plots total_calls = optimize_calls + eval_calls"},
    };
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Beam search with momentum-guided expansion and UCB selection.
class Optimizer {
public:
    Optimizer(const DatasetSplit& split, const RunConfig& cfg, Gateway& gateway, RunOptions options = {})
        : split_(split),
          cfg_(validate_config(cfg)),
          gateway_(gateway),
          options_(std::move(options)),
          task_(TaskConfig::from_split(split, cfg.temperature)),
          momentum_(cfg.momentum_enabled, cfg.history_strategy, cfg.rng_seed) {}

    /// Children of `parent` for search round `round`, given its predictions
    /// on that round's minibatch. The parent itself is not included.
    std::vector<Prompt> expand(const Prompt& parent, int round, const std::vector<Example>& minibatch,
                               const std::vector<bool>& correct) {
        ExpansionContext ctx{cfg_, options_.templates, gateway_, split_.task_type, round, prompt_ids_, gradient_ids_,
                             result_.shortfalls};
        const std::string history = momentum_.history_text(round);
        const auto quota = gradient_quota(cfg_);

        struct Side {
            Polarity polarity;
            ExampleSample sample;
            std::vector<Gradient> gradients;
        };
        std::vector<Side> sides;
        const auto sample_for = [&](Correctness want) {
            return sample_by_correctness(minibatch, correct, cfg_.num_correct_examples, want, cfg_.rng_seed, round,
                                         parent.id.value);
        };
        if (quota.positive > 0) {
            Side side{Polarity::positive, sample_for(Correctness::correct), {}};
            side.gradients = generate_gradients(parent, side.sample, history, Polarity::positive, quota.positive, ctx);
            sides.push_back(std::move(side));
        }
        if (quota.negative > 0) {
            Side side{Polarity::negative, sample_for(Correctness::incorrect), {}};
            side.gradients = generate_gradients(parent, side.sample, history, Polarity::negative, quota.negative, ctx);
            sides.push_back(std::move(side));
        }

        std::vector<Prompt> children;
        for (const auto& side : sides) {
            for (const auto& g : side.gradients) {
                round_gradients_.push_back(g);
                auto edits = apply_gradient(parent, g, side.sample, history, ctx);
                children.insert(children.end(), edits.begin(), edits.end());
            }
        }
        if (cfg_.baseline_mode) {
            auto paraphrases = paraphrase_expand(parent, cfg_.paraphrases_per_parent, ctx);
            children.insert(children.end(), paraphrases.begin(), paraphrases.end());
        }
        return children;
    }

    /// Runs every round; gateway failures end the run early with
    /// `complete == false` and everything gathered so far.
    RunResult run(std::string_view seed_text) {
        result_ = RunResult{};
        result_.metadata = run_metadata(cfg_);
        calls_at_start_ = gateway_.call_count();
        elapsed_at_start_ = gateway_.elapsed_seconds();
        try {
            const Prompt seed = new_seed_prompt(seed_text, prompt_ids_.next());
            store(seed);
            execute(seed);
            result_.complete = true;
        } catch (const GatewayError& err) {
            result_.complete = false;
            result_.error = err.what();
        }
        finish_counters();
        result_.history = momentum_.history();
        if (!result_.events.empty()) {
            double target = 0.0;
            if (cfg_.target_score) {
                target = *cfg_.target_score;
            } else {
                for (const auto& e : result_.events) target = std::max(target, e.best_test_score);
            }
            result_.report = detect_convergence(result_.events, target);
        }
        return std::move(result_);
    }

private:
    void execute(const Prompt& seed) {
        std::vector<PromptId> beam{seed.id};
        result_.beams.push_back(Beam{0, beam});

        const auto seed_test = test_score(seed.id, 0);
        push_event(0, std::nullopt, seed_test, seed.id);

        for (int round = 0; round < cfg_.search_depth; ++round) {
            round_gradients_.clear();
            const auto minibatch = sample_minibatch(split_, cfg_.minibatch_size, cfg_.rng_seed, round);

            std::vector<Prompt> candidates;
            for (const auto parent_id : beam) {
                const Prompt parent = result_.prompts.at(parent_id);
                const auto eval = evaluate_prompt(parent, minibatch, gateway_, task_);
                record_predictions(round, parent.id, "minibatch", eval.predictions);
                auto children = expand(parent, round, minibatch, eval.correctness());
                if (cfg_.parent_retention || children.empty()) candidates.push_back(parent);
                for (auto& child : children) {
                    store(child);
                    candidates.push_back(std::move(child));
                }
            }
            result_.gradients.insert(result_.gradients.end(), round_gradients_.begin(), round_gradients_.end());

            std::sort(candidates.begin(), candidates.end(),
                      [](const Prompt& a, const Prompt& b) { return a.id < b.id; });
            auto outcome = select_prompts(candidates, split_, cfg_.bandit, cfg_.beam_width, gateway_, task_,
                                          cfg_.rng_seed, round + 1);
            for (const auto& arm : outcome.arms) {
                if (arm.pulls > 0) result_.prompts.at(arm.prompt_id).train_score = arm.mean_reward();
            }
            beam.clear();
            for (const auto idx : outcome.selected) beam.push_back(outcome.arms[idx].prompt_id);
            const Beam next{round + 1, beam};
            result_.beams.push_back(next);

            momentum_.record_round(round, next, round_gradients_, result_.prompts);
            momentum_.sample(round);

            const PromptId best_train = best_on_train(outcome);
            const auto best_train_score = mean_reward_of(outcome, best_train);
            result_.bandit_tables.push_back(BanditTable{round + 1, std::move(outcome)});

            PromptId reported = best_train;
            double best_test = test_score(best_train, round + 1);
            if (cfg_.full_beam_test_eval) {
                for (const auto id : beam) {
                    const double score = test_score(id, round + 1);
                    if (score > best_test || (score == best_test && id < reported)) {
                        best_test = score;
                        reported = id;
                    }
                }
            }
            push_event(round + 1, best_train_score, best_test, reported);
        }

        select_final(beam);
    }

    void select_final(const std::vector<PromptId>& beam) {
        const long before = optimize_calls();
        auto engine = rng::stream(cfg_.rng_seed, rng::Stream::final_minibatch);
        const auto minibatch = sample_examples(split_.train, cfg_.minibatch_size, engine);
        std::optional<FinalScore> best;
        for (const auto id : beam) {
            const auto eval = evaluate_prompt(result_.prompts.at(id), minibatch, gateway_, task_);
            record_predictions(cfg_.search_depth, id, "final_minibatch", eval.predictions);
            result_.prompts.at(id).train_score = eval.score;
            result_.final_scores.push_back({id, eval.score});
            if (!best || eval.score > best->score || (eval.score == best->score && id < best->prompt_id)) {
                best = FinalScore{id, eval.score};
            }
        }
        result_.final_selection_calls = optimize_calls() - before;
        test_score(best->prompt_id, cfg_.search_depth);
        result_.best = result_.prompts.at(best->prompt_id);
    }

    static PromptId best_on_train(const BanditOutcome& outcome) {
        std::optional<std::size_t> best;
        for (const auto idx : outcome.selected) {
            const auto& arm = outcome.arms[idx];
            if (!best) {
                best = idx;
                continue;
            }
            const auto& cur = outcome.arms[*best];
            if (arm.mean_reward() > cur.mean_reward() ||
                (arm.mean_reward() == cur.mean_reward() && arm.prompt_id < cur.prompt_id)) {
                best = idx;
            }
        }
        return outcome.arms[*best].prompt_id;
    }

    static double mean_reward_of(const BanditOutcome& outcome, PromptId id) {
        for (const auto& arm : outcome.arms) {
            if (arm.prompt_id == id) return arm.mean_reward();
        }
        return 0.0;
    }

    /// Test score of a prompt, evaluated at most once per run.
    double test_score(PromptId id, int round) {
        auto& prompt = result_.prompts.at(id);
        if (prompt.test_score) return *prompt.test_score;
        const long before = gateway_.call_count();
        Evaluation eval;
        try {
            eval = evaluate_prompt(prompt, split_.test, gateway_, task_);
        } catch (...) {
            eval_calls_ += gateway_.call_count() - before;
            throw;
        }
        eval_calls_ += gateway_.call_count() - before;
        record_predictions(round, id, "test", eval.predictions);
        prompt.test_score = eval.score;
        return eval.score;
    }

    void record_predictions(int round, PromptId id, const char* split, const std::vector<Prediction>& preds) {
        if (options_.verbose) result_.predictions.push_back({round, id, split, preds});
    }

    void store(const Prompt& p) { result_.prompts.insert_or_assign(p.id, p); }

    long optimize_calls() const { return gateway_.call_count() - calls_at_start_ - eval_calls_; }

    void push_event(int round, std::optional<double> train, double test, PromptId best) {
        result_.events.push_back(MetricEvent{round, gateway_.elapsed_seconds() - elapsed_at_start_, optimize_calls(),
                                             eval_calls_, train, test, best});
    }

    void finish_counters() {
        result_.optimize_calls = optimize_calls();
        result_.eval_calls = eval_calls_;
    }

    const DatasetSplit& split_;
    RunConfig cfg_;
    Gateway& gateway_;
    RunOptions options_;
    TaskConfig task_;
    MomentumTracker momentum_;
    IdSequence<PromptId> prompt_ids_;
    IdSequence<GradientId> gradient_ids_;
    std::vector<Gradient> round_gradients_;
    RunResult result_;
    long calls_at_start_ = 0;
    long eval_calls_ = 0;
    double elapsed_at_start_ = 0.0;
};

/// Convenience wrapper: one full run.
inline RunResult run_search(std::string_view seed_text, const DatasetSplit& split, const RunConfig& cfg,
                            Gateway& gateway, RunOptions options = {}) {
    Optimizer optimizer(split, cfg, gateway, std::move(options));
    return optimizer.run(seed_text);
}

}  // namespace mapo
