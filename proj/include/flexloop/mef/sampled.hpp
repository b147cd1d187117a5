#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/errors.hpp"
#include "flexloop/mef/feedback.hpp"

namespace flexloop::mef {

// Monte-Carlo feedback: per-action continuation counts estimated by random
// dives with the product-of-branching tree-size estimator. Each dive walks
// to the horizon picking uniformly among branches that keep exact tracking
// possible and pass the completion check, multiplying the branch counts
// along the way; dives that dead-end score zero. The estimate is unbiased
// for the exact count because every surviving full-depth path is weighted
// by the inverse of its sampling probability.
//
// Deterministic per (seed, prefix): the generator is re-seeded from both.
template <core::ConstraintOracle O>
class SampledMef {
public:
    SampledMef(const O& oracle, int sample_count, std::uint64_t seed)
        : oracle_(oracle), sample_count_(sample_count), seed_(seed) {
        if (sample_count_ < 1)
            throw InvalidInputError("sample count must be at least 1");
    }

    // Mean per-action estimate of |S(prefix + a)| over sample_count dives.
    std::vector<double> estimate_counts(std::span<const int> prefix) const {
        const int levels = oracle_.num_levels();
        std::vector<double> est(levels, 0.0);
        typename O::State s = oracle_.initial_state();
        for (int u : prefix) {
            if (u < 0 || u >= levels)
                throw InvalidInputError("prefix contains an action level out of range");
            if (!oracle_.can_apply(s, u)) return est;
            s = oracle_.advance_state(s, u);
        }
        if (s.next_slot > oracle_.horizon()) return est;

        std::mt19937_64 rng(mix_seed(prefix));
        for (int a = 0; a < levels; ++a) {
            if (!oracle_.can_apply(s, a)) continue;
            const typename O::State child = oracle_.advance_state(s, a);
            double sum = 0.0;
            for (int k = 0; k < sample_count_; ++k) sum += dive(child, rng);
            est[a] = sum / sample_count_;
        }
        return est;
    }

    FlexibilityFeedback feedback_for(std::span<const int> prefix) const {
        const std::vector<double> est = estimate_counts(prefix);
        FlexibilityFeedback fb;
        fb.provenance = FlexibilityFeedback::Provenance::sampled;
        fb.sample_count = sample_count_;
        fb.probs.assign(est.size(), 0.0);
        double total = 0.0;
        for (double e : est) total += e;
        if (total > 0.0) {
            for (std::size_t i = 0; i < est.size(); ++i) fb.probs[i] = est[i] / total;
        }
        return fb;
    }

private:
    // One dive: product of admissible-branch counts down to the horizon,
    // zero if the walk dies early.
    double dive(typename O::State s, std::mt19937_64& rng) const {
        double weight = 1.0;
        const int T = oracle_.horizon();
        const int levels = oracle_.num_levels();
        std::vector<int> branches;
        branches.reserve(levels);
        while (s.next_slot <= T) {
            branches.clear();
            for (int a = 0; a < levels; ++a) {
                if (!oracle_.can_apply(s, a)) continue;
                typename O::State child = oracle_.advance_state(s, a);
                if (oracle_.has_feasible_completion(child)) branches.push_back(a);
            }
            if (branches.empty()) return 0.0;
            weight *= static_cast<double>(branches.size());
            // Modulo draw: bias is ~|branches| / 2^64, far below estimator noise.
            const int pick = branches[static_cast<std::size_t>(rng() % branches.size())];
            s = oracle_.advance_state(s, pick);
        }
        return oracle_.has_feasible_completion(s) ? weight : 0.0;
    }

    std::uint64_t mix_seed(std::span<const int> prefix) const {
        // splitmix-style avalanche over seed and prefix contents.
        std::uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ull;
        auto mix = [&h](std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
            h *= 0xbf58476d1ce4e5b9ull;
            h ^= h >> 27;
        };
        mix(prefix.size());
        for (int u : prefix) mix(static_cast<std::uint64_t>(u) + 1);
        return h;
    }

    const O& oracle_;
    int sample_count_;
    std::uint64_t seed_;
};

} // namespace flexloop::mef
