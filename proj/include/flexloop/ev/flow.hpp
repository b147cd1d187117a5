#pragma once

#include <cstdint>
#include <vector>

namespace flexloop::ev {

// Feasibility checker for flow networks with per-arc lower and upper bounds.
// Lower bounds are removed by the usual excess transformation: each arc
// [lo, hi] ships lo implicitly, crediting its head and debiting its tail;
// a super source/sink then has to route all excess, which succeeds iff a
// feasible circulation exists. Capacities are integers (milli-kWh), so the
// answer is exact.
class BoundedFlowNetwork {
public:
    explicit BoundedFlowNetwork(int node_count);

    // Adds a directed arc carrying between `lo` and `hi` units.
    void add_arc(int from, int to, std::int64_t lo, std::int64_t hi);

    // True iff a circulation satisfying every bound exists. `circulate`
    // closes the network with a free return arc from `sink` to `source`;
    // without it the network must already be balanced.
    bool feasible(int source, int sink);

private:
    struct Edge {
        int to;
        std::int64_t cap;
        int rev;
    };

    void add_edge(int from, int to, std::int64_t cap);
    std::int64_t max_flow(int s, int t);
    bool bfs_level(int s, int t);
    std::int64_t dfs_push(int v, int t, std::int64_t pushed);

    int n_;
    std::vector<std::vector<Edge>> adj_;
    std::vector<std::int64_t> excess_;
    std::vector<int> level_;
    std::vector<int> iter_;
};

} // namespace flexloop::ev
