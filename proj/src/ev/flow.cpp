#include "flexloop/ev/flow.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "flexloop/errors.hpp"

namespace flexloop::ev {

namespace {
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
}

BoundedFlowNetwork::BoundedFlowNetwork(int node_count)
    : n_(node_count + 2), adj_(n_), excess_(n_, 0) {}

void BoundedFlowNetwork::add_edge(int from, int to, std::int64_t cap) {
    adj_[from].push_back({to, cap, static_cast<int>(adj_[to].size())});
    adj_[to].push_back({from, 0, static_cast<int>(adj_[from].size()) - 1});
}

void BoundedFlowNetwork::add_arc(int from, int to, std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw InvalidInputError("flow arc with lo > hi");
    if (lo < 0) throw InvalidInputError("flow arc with negative lower bound");
    if (hi > lo) add_edge(from, to, hi - lo);
    excess_[to] += lo;
    excess_[from] -= lo;
}

bool BoundedFlowNetwork::feasible(int source, int sink) {
    // Close the circulation.
    add_edge(sink, source, kInf);

    const int super_s = n_ - 2;
    const int super_t = n_ - 1;
    std::int64_t need = 0;
    for (int v = 0; v < n_ - 2; ++v) {
        if (excess_[v] > 0) {
            add_edge(super_s, v, excess_[v]);
            need += excess_[v];
        } else if (excess_[v] < 0) {
            add_edge(v, super_t, -excess_[v]);
        }
    }
    return max_flow(super_s, super_t) == need;
}

bool BoundedFlowNetwork::bfs_level(int s, int t) {
    level_.assign(n_, -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (const Edge& e : adj_[v]) {
            if (e.cap > 0 && level_[e.to] < 0) {
                level_[e.to] = level_[v] + 1;
                q.push(e.to);
            }
        }
    }
    return level_[t] >= 0;
}

std::int64_t BoundedFlowNetwork::dfs_push(int v, int t, std::int64_t pushed) {
    if (v == t) return pushed;
    for (int& i = iter_[v]; i < static_cast<int>(adj_[v].size()); ++i) {
        Edge& e = adj_[v][i];
        if (e.cap > 0 && level_[v] < level_[e.to]) {
            std::int64_t d = dfs_push(e.to, t, std::min(pushed, e.cap));
            if (d > 0) {
                e.cap -= d;
                adj_[e.to][e.rev].cap += d;
                return d;
            }
        }
    }
    return 0;
}

std::int64_t BoundedFlowNetwork::max_flow(int s, int t) {
    std::int64_t flow = 0;
    while (bfs_level(s, t)) {
        iter_.assign(n_, 0);
        while (std::int64_t f = dfs_push(s, t, kInf)) flow += f;
    }
    return flow;
}

} // namespace flexloop::ev
