#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/datasets.hpp"
#include "mapo/gateway.hpp"
#include "mapo/rng.hpp"
#include "mapo/scoring.hpp"

namespace mapo {

/// Per-arm statistics. `N` and `Q` drive selection; `pulls` and
/// `reward_sum` are kept for telemetry.
struct ArmState {
    PromptId prompt_id;
    long N = 0;
    double Q = 0.0;
    int pulls = 0;
    double reward_sum = 0.0;

    double mean_reward() const { return pulls == 0 ? 0.0 : reward_sum / pulls; }
};

inline void to_json(json& j, const ArmState& a) {
    j = json{{"prompt_id", a.prompt_id}, {"N", a.N}, {"Q", a.Q}, {"pulls", a.pulls}, {"mean_reward", a.mean_reward()}};
}

/// Q + c_v * sqrt(ln t / N); +inf for an arm that has never been pulled.
inline double ucb_value(const ArmState& arm, int t, double exploration) {
    if (arm.N == 0) return std::numeric_limits<double>::infinity();
    return arm.Q + exploration * std::sqrt(std::log(static_cast<double>(t)) / static_cast<double>(arm.N));
}

/// What one pull observed.
struct Observation {
    double reward = 0.0;
    long samples = 1;  // |D_sample|
};

struct PullRecord {
    int t = 0;
    PromptId prompt_id;
    double reward = 0.0;
};

inline void to_json(json& j, const PullRecord& p) {
    j = json{{"t", p.t}, {"prompt_id", p.prompt_id}, {"reward", p.reward}};
}

struct BanditOutcome {
    std::vector<ArmState> arms;         // same order as the input
    std::vector<std::size_t> selected;  // indices into arms, best first
    std::vector<PullRecord> pulls;
};

inline void update_arm(ArmState& arm, const Observation& obs, BanditUpdate rule) {
    ++arm.pulls;
    arm.reward_sum += obs.reward;
    if (rule == BanditUpdate::paper) {
        // N counts samples and the increment uses the post-update N.
        arm.N += obs.samples;
        arm.Q += obs.reward / static_cast<double>(arm.N);
    } else {
        arm.N += 1;
        arm.Q = arm.reward_sum / arm.pulls;
    }
}

/// UCB best-arm identification over `arm_ids` for T steps, returning the
/// `keep` arms with the highest final Q. Ties always go to the lowest id.
/// `reward(arm_index, t)` performs one pull and returns its Observation.
template <typename RewardFn>
BanditOutcome ucb_select(std::span<const PromptId> arm_ids, const BanditConfig& cfg, int keep, RewardFn&& reward) {
    if (arm_ids.empty()) throw Error("bandit selection needs at least one candidate");
    BanditOutcome out;
    out.arms.reserve(arm_ids.size());
    for (const auto id : arm_ids) {
        ArmState arm;
        arm.prompt_id = id;
        out.arms.push_back(arm);
    }

    for (int t = 1; t <= cfg.time_steps; ++t) {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.arms.size(); ++i) {
            const double value = ucb_value(out.arms[i], t, cfg.exploration);
            if (value > best_value || (value == best_value && out.arms[i].prompt_id < out.arms[best].prompt_id)) {
                best = i;
                best_value = value;
            }
        }
        const Observation obs = reward(best, t);
        update_arm(out.arms[best], obs, cfg.update);
        out.pulls.push_back({t, out.arms[best].prompt_id, obs.reward});
    }

    std::vector<std::size_t> order(out.arms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out.arms[a].Q != out.arms[b].Q) return out.arms[a].Q > out.arms[b].Q;
        return out.arms[a].prompt_id < out.arms[b].prompt_id;
    });
    order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(keep, 0))));
    out.selected = std::move(order);
    return out;
}

/// Bandit selection over prompts: each pull scores the chosen prompt on a
/// fresh uniform sample of the training set drawn on the (seed, round, t) stream.
inline BanditOutcome select_prompts(std::span<const Prompt> candidates, const DatasetSplit& split,
                                    const BanditConfig& cfg, int keep, Gateway& gateway, const TaskConfig& task,
                                    std::uint64_t seed, int round) {
    std::vector<PromptId> ids;
    ids.reserve(candidates.size());
    for (const auto& p : candidates) ids.push_back(p.id);
    return ucb_select(ids, cfg, keep, [&](std::size_t arm, int t) {
        auto engine = rng::stream(seed, rng::Stream::bandit_sample,
                                  {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(t)});
        const auto sample = sample_examples(split.train, cfg.sample_size, engine);
        const auto eval = evaluate_prompt(candidates[arm], sample, gateway, task);
        return Observation{eval.score, static_cast<long>(sample.size())};
    });
}

}  // namespace mapo
