#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace flexloop::ctrl {

// Successive-shortest-paths min-cost flow with nonnegative per-unit costs.
// Capacities are integers (milli-kWh); costs are doubles. Dijkstra with
// potentials picks augmenting paths; arc insertion order and node indices
// break all ties, so results are deterministic.
class MinCostFlow {
public:
    explicit MinCostFlow(int n);

    static constexpr std::int64_t kInf = std::int64_t{1} << 60;

    // Returns an id that can be passed to flow_on() after solving.
    int add_edge(int from, int to, std::int64_t cap, double cost_per_unit);

    // Pushes up to `want` units from src to dst along cheapest paths.
    // Returns (units shipped, total cost). Stops early when dst becomes
    // unreachable, so shipped < want signals infeasibility to the caller.
    std::pair<std::int64_t, double> solve(int src, int dst, std::int64_t want);

    std::int64_t flow_on(int edge_id) const;

private:
    struct Edge {
        int to;
        std::int64_t cap;
        double cost;
        int rev;
    };

    std::vector<std::vector<Edge>> g_;
    std::vector<std::pair<int, int>> edge_pos_; // edge id -> (node, offset)
    std::vector<std::int64_t> initial_cap_;
};

} // namespace flexloop::ctrl
