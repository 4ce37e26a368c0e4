#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapo/core.hpp"
#include "mapo/gradient_engine.hpp"
#include "mapo/rng.hpp"

namespace mapo {

/// Gradients of this round that produced a member of the selected beam,
/// ordered by gradient id. Survivors without a gradient (retained parents,
/// paraphrases) contribute nothing.
inline std::vector<Gradient> attributed_pool(const Beam& beam_next, std::span<const Gradient> round_gradients,
                                             const PromptStore& prompts) {
    std::vector<Gradient> pool;
    for (const auto& g : round_gradients) {
        const bool used = std::any_of(beam_next.prompts.begin(), beam_next.prompts.end(), [&](PromptId id) {
            const auto it = prompts.find(id);
            return it != prompts.end() && it->second.gradient_id == g.id;
        });
        if (used) pool.push_back(g);
    }
    std::sort(pool.begin(), pool.end(), [](const Gradient& a, const Gradient& b) { return a.id < b.id; });
    return pool;
}

/// One uniform draw from `pool` on the (seed, round) momentum stream.
inline std::optional<Gradient> sample_history_gradient(std::span<const Gradient> pool, std::uint64_t seed, int round) {
    if (pool.empty()) return std::nullopt;
    auto engine = rng::stream(seed, rng::Stream::momentum, {static_cast<std::uint64_t>(round)});
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(engine)];
}

/// Round-indexed history of surviving gradients and the momentum text
/// injected into the next round's templates.
///
/// Pools and samples are kept even when momentum is disabled so that a
/// disabled run consumes exactly the same random draws; only the text
/// binding changes.
class MomentumTracker {
public:
    MomentumTracker(bool enabled, HistoryStrategy strategy, std::uint64_t seed)
        : enabled_(enabled), strategy_(strategy), seed_(seed) {}

    /// Stores pools[round] for the beam selected at the end of `round`.
    const std::vector<Gradient>& record_round(int round, const Beam& beam_next,
                                              std::span<const Gradient> round_gradients, const PromptStore& prompts) {
        auto pool = attributed_pool(beam_next, round_gradients, prompts);
        auto& ids = history_.pools[round];
        ids.clear();
        for (const auto& g : pool) {
            ids.push_back(g.id);
            gradients_.insert_or_assign(g.id, g);
        }
        return pools_[round] = std::move(pool);
    }

    /// Draws sampled[round] from pools[round]; absent when the pool is empty.
    std::optional<Gradient> sample(int round) {
        const auto it = pools_.find(round);
        if (it == pools_.end()) return std::nullopt;
        auto drawn = sample_history_gradient(it->second, seed_, round);
        if (drawn) history_.sampled[round] = drawn->id;
        else history_.sampled.erase(round);
        return drawn;
    }

    /// Text bound to the history slot while expanding `round`.
    std::string history_text(int round) const {
        if (!enabled_ || round <= 0) return std::string(kNoHistory);
        if (strategy_ == HistoryStrategy::concatenate_samples) {
            std::string joined;
            for (const auto& [r, id] : history_.sampled) {
                if (r >= round) break;
                if (!joined.empty()) joined += '\n';
                joined += gradients_.at(id).text;
            }
            return joined.empty() ? std::string(kNoHistory) : joined;
        }
        const auto it = history_.sampled.find(round - 1);
        if (it == history_.sampled.end()) return std::string(kNoHistory);
        return gradients_.at(it->second).text;
    }

    const GradientHistory& history() const { return history_; }
    bool enabled() const { return enabled_; }

private:
    bool enabled_;
    HistoryStrategy strategy_;
    std::uint64_t seed_;
    GradientHistory history_;
    std::map<int, std::vector<Gradient>> pools_;
    std::map<GradientId, Gradient> gradients_;
};

}  // namespace mapo
