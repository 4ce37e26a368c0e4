#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <random>
#include <vector>

namespace mapo::rng {

using Engine = std::mt19937_64;

/// Purposes that get their own independent random stream.
enum class Stream : std::uint32_t {
    split = 1,
    minibatch = 2,
    correct_sample = 3,
    bandit_sample = 4,
    momentum = 5,
    retry_jitter = 6,
    final_minibatch = 7,
};

/// Engine for the stream identified by (seed, purpose, coordinates...).
/// Pure function of its arguments, so reruns see identical draws.
inline Engine stream(std::uint64_t seed, Stream purpose, std::initializer_list<std::uint64_t> coords = {}) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                     static_cast<std::uint32_t>(purpose)};
    for (const std::uint64_t c : coords) {
        words.push_back(static_cast<std::uint32_t>(c));
        words.push_back(static_cast<std::uint32_t>(c >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

/// `n` distinct indices from [0, population), in ascending order.
inline std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, Engine& engine) {
    std::vector<std::size_t> all(population);
    for (std::size_t i = 0; i < population; ++i) all[i] = i;
    std::vector<std::size_t> out;
    out.reserve(std::min(n, population));
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, engine);
    return out;
}

/// `n` indices from [0, population) drawn with replacement.
inline std::vector<std::size_t> draw_indices(std::size_t population, std::size_t n, Engine& engine) {
    std::uniform_int_distribution<std::size_t> pick(0, population - 1);
    std::vector<std::size_t> out(n);
    for (auto& idx : out) idx = pick(engine);
    return out;
}

}  // namespace mapo::rng
