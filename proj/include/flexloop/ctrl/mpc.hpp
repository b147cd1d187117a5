#pragma once

#include <span>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/ev/aggregator.hpp"

namespace flexloop::ctrl {

struct MpcConfig {
    double gamma = 1.0;   // demand relaxation in [0, 1]
    int fixed_window = 0; // 0: plan to the latest departure among present sessions
};

// Continuous relaxed schedule over slots [t0, t1]: meets the given
// per-session residual demands within windows and rate caps, subject to the
// per-slot operational cap, at minimum linear cost. Slot totals are not
// restricted to the action grid.
struct SchedulePlan {
    bool feasible = false;
    int t0 = 1;
    std::vector<core::MilliKwh> slot_total_mkwh;               // index tau - t0
    std::vector<std::vector<core::MilliKwh>> session_slot_mkwh; // [session][tau - t0]
    double flow_cost = 0.0;
};

SchedulePlan solve_linear_schedule(const ev::EvAggregator& agg,
                                   std::span<const core::MilliKwh> demands_mkwh, int t0, int t1,
                                   std::span<const double> prices_per_kwh);

struct MpcStepResult {
    int level = 0;                    // committed grid index
    bool feasible = false;            // relaxed problem solvable
    core::MilliKwh planned_slot_mkwh = 0; // continuous plan for slot t, before rounding
    std::vector<double> per_session_plan_kwh; // slot-t share per session
};

// Receding-horizon step: plan for the sessions present at slot t with
// demands relaxed to gamma * e, commit slot t's aggregate rounded down to
// the grid. An unsolvable relaxation commits zero energy and reports
// feasible = false.
MpcStepResult mpc_step(const ev::EvAggregator& agg, const ev::EvState& state,
                       std::span<const double> prices_per_kwh, const MpcConfig& config, int t);

} // namespace flexloop::ctrl
