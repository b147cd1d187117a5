#pragma once

#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/mef/feedback.hpp"

namespace flexloop::ctrl {

enum class PpcTieBreak { lowest_level, highest_prob_then_lowest_level };

// beta carries the cost's currency units: it multiplies a dimensionless
// log-probability and is added to per-slot costs.
struct PpcConfig {
    std::vector<double> beta; // one entry per slot, or a single broadcast value
    PpcTieBreak tie_break = PpcTieBreak::lowest_level;
    bool permissive_deadend = false; // honored by the closed-loop driver, not ppc_step

    double beta_at(int t) const; // t is 1-based
};

// One operator decision: minimize c_t(u) - beta_t * log p_t(u) over grid
// levels, excluding zero-probability levels. Dead-end feedback throws; the
// caller decides whether to abort or fall back.
int ppc_step(const mef::FlexibilityFeedback& feedback, const core::CostSchedule& costs,
             const core::ActionGrid& grid, double slot_hours, const PpcConfig& config, int t);

} // namespace flexloop::ctrl
