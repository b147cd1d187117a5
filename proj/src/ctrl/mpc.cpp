#include "flexloop/ctrl/mpc.hpp"

#include <algorithm>
#include <cmath>

#include "flexloop/ctrl/mincost_flow.hpp"
#include "flexloop/errors.hpp"

namespace flexloop::ctrl {

SchedulePlan solve_linear_schedule(const ev::EvAggregator& agg,
                                   std::span<const core::MilliKwh> demands_mkwh, int t0, int t1,
                                   std::span<const double> prices_per_kwh) {
    const int n = static_cast<int>(agg.sessions().size());
    if (static_cast<int>(demands_mkwh.size()) != n)
        throw InvalidInputError("demand vector does not match the session list");
    if (t0 < 1 || t1 > agg.horizon() || t1 < t0 - 1)
        throw InvalidInputError("planning range outside the horizon");
    if (static_cast<int>(prices_per_kwh.size()) != agg.horizon())
        throw InvalidInputError("price vector does not match the horizon");
    for (double p : prices_per_kwh)
        if (!(p >= 0.0)) throw InvalidInputError("prices must be nonnegative");

    SchedulePlan plan;
    plan.t0 = t0;
    const int nslots = t1 - t0 + 1;
    plan.slot_total_mkwh.assign(std::max(nslots, 0), 0);
    plan.session_slot_mkwh.assign(n, std::vector<core::MilliKwh>(std::max(nslots, 0), 0));

    core::MilliKwh want = 0;
    for (int j = 0; j < n; ++j) {
        if (demands_mkwh[j] < 0) throw InvalidInputError("negative demand");
        want += demands_mkwh[j];
    }
    if (want == 0) {
        plan.feasible = true;
        return plan;
    }
    if (nslots <= 0) return plan; // demand left but no slots to plan

    core::MilliKwh slot_cap = MinCostFlow::kInf;
    if (agg.grid().cap_xi_kwh()) slot_cap = core::to_mkwh(*agg.grid().cap_xi_kwh());

    // Node layout: 0 source, 1..n sessions, then slots, then sink.
    const int source = 0;
    const int sink = n + nslots + 1;
    MinCostFlow mcf(n + nslots + 2);
    std::vector<std::vector<int>> arc_ids(n);
    std::vector<std::vector<int>> arc_slots(n);
    for (int j = 0; j < n; ++j) {
        if (demands_mkwh[j] == 0) continue;
        const auto& s = agg.sessions()[j];
        const int from = std::max(s.arrival, t0);
        const int to = std::min(s.departure, t1);
        if (from > to) return plan; // demand with no usable slot: infeasible
        mcf.add_edge(source, 1 + j, demands_mkwh[j], 0.0);
        for (int tau = from; tau <= to; ++tau) {
            arc_ids[j].push_back(mcf.add_edge(1 + j, n + 1 + (tau - t0),
                                              agg.session_rate_mkwh(j), 0.0));
            arc_slots[j].push_back(tau);
        }
    }
    for (int tau = t0; tau <= t1; ++tau)
        mcf.add_edge(n + 1 + (tau - t0), sink, slot_cap, prices_per_kwh[tau - 1] / 1000.0);

    const auto [shipped, cost] = mcf.solve(source, sink, want);
    if (shipped != want) return plan;
    plan.feasible = true;
    plan.flow_cost = cost;
    for (int j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < arc_ids[j].size(); ++k) {
            const core::MilliKwh f = mcf.flow_on(arc_ids[j][k]);
            plan.session_slot_mkwh[j][arc_slots[j][k] - t0] = f;
            plan.slot_total_mkwh[arc_slots[j][k] - t0] += f;
        }
    }
    return plan;
}

MpcStepResult mpc_step(const ev::EvAggregator& agg, const ev::EvState& state,
                       std::span<const double> prices_per_kwh, const MpcConfig& config, int t) {
    if (!(config.gamma >= 0.0 && config.gamma <= 1.0))
        throw InvalidInputError("gamma must lie in [0, 1]");
    if (t < 1 || t > agg.horizon()) throw InvalidInputError("mpc step outside the horizon");
    if (state.next_slot != t)
        throw InvalidInputError("state is positioned at a different slot than t");

    const int n = static_cast<int>(agg.sessions().size());
    MpcStepResult out;
    out.per_session_plan_kwh.assign(n, 0.0);

    // Present sessions only: arrived and not yet departed. Future arrivals
    // are invisible to the receding-horizon planner.
    std::vector<core::MilliKwh> demands(n, 0);
    int t1 = t - 1;
    for (int j = 0; j < n; ++j) {
        const auto& s = agg.sessions()[j];
        if (s.arrival > t || s.departure < t) continue;
        t1 = std::max(t1, s.departure);
        // Relaxed target gamma * e, net of energy already delivered.
        const core::MilliKwh target =
            agg.session_energy_mkwh(j) -
            static_cast<core::MilliKwh>(std::llround((1.0 - config.gamma) *
                                                     static_cast<double>(agg.session_energy_mkwh(j))));
        const core::MilliKwh delivered = agg.session_energy_mkwh(j) - state.remaining[j];
        demands[j] = std::max<core::MilliKwh>(0, target - delivered);
    }
    if (config.fixed_window > 0) t1 = std::min(agg.horizon(), t + config.fixed_window - 1);
    const int zero_level = agg.grid().round_down_to_level(0, agg.slot_hours());
    if (t1 < t) { // nobody present: commit zero energy
        out.level = zero_level;
        out.feasible = true;
        return out;
    }

    SchedulePlan plan = solve_linear_schedule(agg, demands, t, t1, prices_per_kwh);
    if (!plan.feasible) {
        out.level = zero_level;
        out.feasible = false;
        return out;
    }
    out.feasible = true;
    out.planned_slot_mkwh = plan.slot_total_mkwh.empty() ? 0 : plan.slot_total_mkwh[0];
    out.level = agg.grid().round_down_to_level(out.planned_slot_mkwh, agg.slot_hours());
    for (int j = 0; j < n; ++j)
        if (!plan.session_slot_mkwh[j].empty())
            out.per_session_plan_kwh[j] = core::from_mkwh(plan.session_slot_mkwh[j][0]);
    return out;
}

} // namespace flexloop::ctrl
