#include "flexloop/ctrl/mincost_flow.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "flexloop/errors.hpp"

namespace flexloop::ctrl {

MinCostFlow::MinCostFlow(int n) : g_(n) {}

int MinCostFlow::add_edge(int from, int to, std::int64_t cap, double cost_per_unit) {
    if (from < 0 || from >= static_cast<int>(g_.size()) || to < 0 ||
        to >= static_cast<int>(g_.size()))
        throw InvalidInputError("min-cost flow arc endpoint out of range");
    if (cap < 0 || cost_per_unit < 0.0)
        throw InvalidInputError("min-cost flow arcs need cap >= 0 and cost >= 0");
    const int id = static_cast<int>(edge_pos_.size());
    edge_pos_.emplace_back(from, static_cast<int>(g_[from].size()));
    initial_cap_.push_back(cap);
    g_[from].push_back({to, cap, cost_per_unit, static_cast<int>(g_[to].size())});
    g_[to].push_back({from, 0, -cost_per_unit, static_cast<int>(g_[from].size()) - 1});
    return id;
}

std::pair<std::int64_t, double> MinCostFlow::solve(int src, int dst, std::int64_t want) {
    const int n = static_cast<int>(g_.size());
    std::vector<double> pot(n, 0.0); // valid initially: all residual costs >= 0
    std::vector<double> dist(n);
    std::vector<int> prev_node(n), prev_edge(n);
    std::int64_t shipped = 0;
    double total_cost = 0.0;

    while (shipped < want) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        dist[src] = 0.0;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
        pq.push({0.0, src});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            for (std::size_t i = 0; i < g_[u].size(); ++i) {
                const Edge& e = g_[u][i];
                if (e.cap <= 0) continue;
                // Potentials keep residual costs nonnegative only up to
                // rounding; clamping stops the tiny negatives from forming
                // descending cycles that would spin the search forever.
                const double nd = d + std::max(0.0, e.cost + pot[u] - pot[e.to]);
                if (nd < dist[e.to]) {
                    dist[e.to] = nd;
                    prev_node[e.to] = u;
                    prev_edge[e.to] = static_cast<int>(i);
                    pq.push({nd, e.to});
                }
            }
        }
        if (dist[dst] == std::numeric_limits<double>::infinity()) break;
        for (int v = 0; v < n; ++v)
            if (dist[v] != std::numeric_limits<double>::infinity()) pot[v] += dist[v];

        std::int64_t push = want - shipped;
        for (int v = dst; v != src; v = prev_node[v])
            push = std::min(push, g_[prev_node[v]][prev_edge[v]].cap);
        for (int v = dst; v != src; v = prev_node[v]) {
            Edge& e = g_[prev_node[v]][prev_edge[v]];
            e.cap -= push;
            g_[e.to][e.rev].cap += push;
            total_cost += static_cast<double>(push) * e.cost;
        }
        shipped += push;
    }
    return {shipped, total_cost};
}

std::int64_t MinCostFlow::flow_on(int edge_id) const {
    const auto [node, off] = edge_pos_.at(edge_id);
    return initial_cap_.at(edge_id) - g_[node][off].cap;
}

} // namespace flexloop::ctrl
