#include "flexloop/ctrl/offline.hpp"

namespace flexloop::ctrl {

OfflineSolution offline_optimal_flow(const ev::EvAggregator& agg,
                                     std::span<const double> prices_per_kwh) {
    const int n = static_cast<int>(agg.sessions().size());
    std::vector<core::MilliKwh> demands(n);
    for (int j = 0; j < n; ++j) demands[j] = agg.session_energy_mkwh(j);

    SchedulePlan plan = solve_linear_schedule(agg, demands, 1, agg.horizon(), prices_per_kwh);
    if (!plan.feasible)
        throw InfeasibleError("demands cannot be met within windows, rates and the cap");

    OfflineSolution out;
    out.method = OfflineSolution::Method::min_cost_flow;
    out.cost = 0.0;
    const int T = agg.horizon();
    out.trajectory.resize(T);
    out.aggregates_kwh.resize(T, 0.0);
    for (int tau = 1; tau <= T; ++tau) {
        const core::MilliKwh total =
            plan.slot_total_mkwh.empty() ? 0 : plan.slot_total_mkwh[tau - 1];
        out.aggregates_kwh[tau - 1] = core::from_mkwh(total);
        out.trajectory[tau - 1] = agg.grid().round_down_to_level(total, agg.slot_hours());
        out.cost += prices_per_kwh[tau - 1] * core::from_mkwh(total);
    }
    return out;
}

} // namespace flexloop::ctrl
