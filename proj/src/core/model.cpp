#include "flexloop/core/model.hpp"

namespace flexloop::core {

double evaluate_cost(const CostSchedule& costs, const ActionGrid& grid,
                     const Trajectory& traj, double slot_hours) {
    if (static_cast<int>(traj.size()) != costs.horizon()) {
        throw InvalidInputError("trajectory length " + std::to_string(traj.size()) +
                                " does not match cost horizon " +
                                std::to_string(costs.horizon()));
    }
    return evaluate_cost_prefix(costs, grid, traj, slot_hours);
}

double evaluate_cost_prefix(const CostSchedule& costs, const ActionGrid& grid,
                            std::span<const int> prefix, double slot_hours) {
    double total = 0.0;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const int level = prefix[i];
        total += costs.at(static_cast<int>(i) + 1, level, grid.level_kw(level), slot_hours);
    }
    return total;
}

} // namespace flexloop::core
