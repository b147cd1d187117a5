#pragma once

#include <string>
#include <vector>

#include <gmpxx.h>

namespace flexloop::mef {

// Per-slot flexibility signal the aggregator hands the operator: one
// probability per action level. The all-zero vector is the dead-end
// marker (no feasible continuation); otherwise entries sum to 1.
struct FlexibilityFeedback {
    enum class Provenance { exact, sampled, external };

    std::vector<double> probs;
    Provenance provenance = Provenance::exact;
    int sample_count = 0; // meaningful for sampled feedback only

    bool dead_end() const {
        for (double p : probs)
            if (p != 0.0) return false;
        return true;
    }
};

// Exact feedback with its integer counting evidence: parent = number of
// feasible completions of the queried prefix, child_counts[a] = completions
// after additionally playing level a. probs_exact[a] = child/parent as an
// exact rational (all zero when parent == 0).
struct MefResult {
    mpz_class parent_count;
    std::vector<mpz_class> child_counts;
    std::vector<mpq_class> probs_exact;
    FlexibilityFeedback feedback;

    bool dead_end() const { return parent_count == 0; }
};

} // namespace flexloop::mef
