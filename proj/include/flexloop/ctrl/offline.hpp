#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/ctrl/mpc.hpp"
#include "flexloop/errors.hpp"
#include "flexloop/ev/aggregator.hpp"

namespace flexloop::ctrl {

struct OfflineSolution {
    enum class Method { brute_force, min_cost_flow };

    core::Trajectory trajectory;        // brute force: exact argmin; flow: per-slot round-down
    std::vector<double> aggregates_kwh; // delivered energy per slot
    double cost = 0.0;
    Method method = Method::brute_force;
};

// Exact minimum-cost feasible trajectory by depth-first search over grid
// actions, cheapest-completion pruning via the feasibility oracle and a
// partial-cost bound. Ascending level order plus strict improvement makes
// the returned argmin the lexicographically smallest among ties.
template <core::ConstraintOracle O>
OfflineSolution offline_optimal_bruteforce(const O& oracle, const core::CostSchedule& costs,
                                           const core::ActionGrid& grid, double slot_hours,
                                           std::uint64_t node_budget = 10'000'000) {
    const int T = oracle.horizon();
    if (costs.horizon() != T)
        throw InvalidInputError("cost schedule length does not match the horizon");

    OfflineSolution best;
    best.method = OfflineSolution::Method::brute_force;
    bool found = false;
    std::uint64_t nodes = 0;
    core::Trajectory prefix;
    prefix.reserve(T);

    auto dfs = [&](auto&& self, const typename O::State& s, double partial_cost) -> void {
        if (++nodes > node_budget)
            throw BudgetError("offline search exceeded the node budget of " +
                              std::to_string(node_budget) + " states");
        if (found && partial_cost >= best.cost) return; // costs are nonnegative
        if (s.next_slot > T) {
            if (!oracle.has_feasible_completion(s)) return;
            if (!found || partial_cost < best.cost) {
                found = true;
                best.cost = partial_cost;
                best.trajectory = prefix;
            }
            return;
        }
        if (!oracle.has_feasible_completion(s)) return;
        const int t = s.next_slot;
        for (int a = 0; a < oracle.num_levels(); ++a) {
            if (!oracle.can_apply(s, a)) continue;
            prefix.push_back(a);
            self(self, oracle.advance_state(s, a),
                 partial_cost + costs.at(t, a, grid.level_kw(a), slot_hours));
            prefix.pop_back();
        }
    };
    dfs(dfs, oracle.initial_state(), 0.0);

    if (!found) throw InfeasibleError("no feasible trajectory exists for this instance");
    best.aggregates_kwh.reserve(T);
    for (int i = 0; i < T; ++i)
        best.aggregates_kwh.push_back(
            core::from_mkwh(grid.level_energy_mkwh(best.trajectory[i], slot_hours)));
    return best;
}

// Continuous-aggregate optimum (no grid restriction) for linear prices via
// min-cost flow; a lower bound on any grid-restricted trajectory cost. The
// reported trajectory rounds each slot total down to the grid and is exact
// when the optimum happens to be grid-representable.
OfflineSolution offline_optimal_flow(const ev::EvAggregator& agg,
                                     std::span<const double> prices_per_kwh);

} // namespace flexloop::ctrl
