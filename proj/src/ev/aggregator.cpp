#include "flexloop/ev/aggregator.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <limits>
#include <numeric>

#include "flexloop/errors.hpp"
#include "flexloop/ev/flow.hpp"

namespace flexloop::ev {

namespace {

void append_i64(std::string& out, std::int64_t v) {
    char buf[sizeof v];
    std::memcpy(buf, &v, sizeof v);
    out.append(buf, sizeof v);
}

} // namespace

EvAggregator::EvAggregator(core::TimeGrid time, core::ActionGrid grid,
                           std::vector<ChargingSession> sessions)
    : time_(time), grid_(std::move(grid)), sessions_(std::move(sessions)) {
    if (time_.horizon_T < 1) throw InvalidInputError("horizon must be at least one slot");
    if (!(time_.slot_hours > 0.0)) throw InvalidInputError("slot duration must be positive");

    const int n = static_cast<int>(sessions_.size());
    energy_mkwh_.resize(n);
    rate_mkwh_.resize(n);
    for (int j = 0; j < n; ++j) {
        const ChargingSession& s = sessions_[j];
        if (s.arrival < 1 || s.departure > time_.horizon_T || s.departure < s.arrival)
            throw InvalidInputError("session '" + s.id + "' has a window outside the horizon");
        if (!(s.energy_kwh > 0.0))
            throw InvalidInputError("session '" + s.id + "' has non-positive demand");
        if (!(s.peak_rate_kw > 0.0))
            throw InvalidInputError("session '" + s.id + "' has non-positive peak rate");
        energy_mkwh_[j] = core::to_mkwh(s.energy_kwh);
        rate_mkwh_[j] = core::to_mkwh(s.peak_rate_kw * time_.slot_hours);
    }

    const int levels = grid_.size();
    if (levels < 1) throw InvalidInputError("action grid is empty");
    level_mkwh_.resize(levels);
    for (int l = 0; l < levels; ++l)
        level_mkwh_[l] = grid_.level_energy_mkwh(l, time_.slot_hours);

    core::MilliKwh cap = std::numeric_limits<core::MilliKwh>::max();
    if (grid_.cap_xi_kwh()) cap = core::to_mkwh(*grid_.cap_xi_kwh());
    num_admissible_levels_ = 0;
    while (num_admissible_levels_ < levels && level_mkwh_[num_admissible_levels_] <= cap)
        ++num_admissible_levels_;
    if (num_admissible_levels_ > 0) {
        free_lo_mkwh_ = level_mkwh_[0];
        free_hi_mkwh_ = level_mkwh_[num_admissible_levels_ - 1];
    }
}

bool EvAggregator::level_within_cap(int level) const {
    return level >= 0 && level < num_admissible_levels_;
}

EvState EvAggregator::initial_state() const {
    EvState s;
    s.next_slot = 1;
    s.remaining = energy_mkwh_;
    return s;
}

core::MilliKwh EvAggregator::saturable_mkwh(const State& s) const {
    const int t = s.next_slot;
    core::MilliKwh total = 0;
    for (std::size_t j = 0; j < sessions_.size(); ++j) {
        if (s.remaining[j] <= 0) continue;
        if (sessions_[j].arrival > t || sessions_[j].departure < t) continue;
        total += std::min(rate_mkwh_[j], s.remaining[j]);
    }
    return total;
}

core::MilliKwh EvAggregator::total_remaining_mkwh(const State& s) const {
    return std::accumulate(s.remaining.begin(), s.remaining.end(), core::MilliKwh{0});
}

std::pair<EvState, DisaggregationResult> EvAggregator::advance(const State& s, int level) const {
    const int t = s.next_slot;
    if (t < 1 || t > time_.horizon_T)
        throw InvalidInputError("cannot advance: slot index outside the horizon");
    if (level < 0 || level >= grid_.size())
        throw InvalidInputError("cannot advance: action level out of range");
    if (s.remaining.size() != sessions_.size())
        throw InvalidInputError("cannot advance: state does not match the session list");

    DisaggregationResult out;
    out.per_session_kwh.assign(sessions_.size(), 0.0);
    out.requested_kwh = core::from_mkwh(level_mkwh_[level]);

    std::vector<int> active;
    for (int j = 0; j < static_cast<int>(sessions_.size()); ++j) {
        if (s.remaining[j] > 0 && sessions_[j].arrival <= t && sessions_[j].departure >= t)
            active.push_back(j);
    }
    // Least laxity first: slack between the time left in the window and the
    // time needed at peak rate. Ties go to the earlier departure, then id.
    std::vector<double> laxity(sessions_.size(), 0.0);
    for (int j : active) {
        const double hours_left = (sessions_[j].departure - t + 1) * time_.slot_hours;
        const double hours_needed = core::from_mkwh(s.remaining[j]) / sessions_[j].peak_rate_kw;
        laxity[j] = hours_left - hours_needed;
    }
    std::sort(active.begin(), active.end(), [&](int a, int b) {
        if (laxity[a] != laxity[b]) return laxity[a] < laxity[b];
        if (sessions_[a].departure != sessions_[b].departure)
            return sessions_[a].departure < sessions_[b].departure;
        return sessions_[a].id < sessions_[b].id;
    });

    EvState ns;
    ns.next_slot = t + 1;
    ns.remaining = s.remaining;
    core::MilliKwh pool = level_mkwh_[level];
    for (int j : active) {
        if (pool <= 0) break;
        const core::MilliKwh g = std::min({rate_mkwh_[j], ns.remaining[j], pool});
        if (g <= 0) continue;
        ns.remaining[j] -= g;
        pool -= g;
        out.per_session_kwh[j] = core::from_mkwh(g);
    }
    out.delivered_kwh = core::from_mkwh(level_mkwh_[level] - pool);
    return {std::move(ns), std::move(out)};
}

EvState EvAggregator::advance_state(const State& s, int level) const {
    return advance(s, level).first;
}

bool EvAggregator::can_apply(const State& s, int level) const {
    if (s.next_slot < 1 || s.next_slot > time_.horizon_T) return false;
    if (!level_within_cap(level)) return false;
    return level_mkwh_[level] <= saturable_mkwh(s);
}

bool EvAggregator::flow_feasible(std::span<const core::MilliKwh> demand,
                                 std::span<const int> win_from, std::span<const int> win_to,
                                 std::span<const std::pair<core::MilliKwh, core::MilliKwh>> slot_bounds) const {
    const int n = static_cast<int>(demand.size());
    const int T = time_.horizon_T;
    // Node layout: 0 source, 1..n sessions, n+1..n+T slots, n+T+1 sink.
    const int source = 0;
    const int sink = n + T + 1;
    BoundedFlowNetwork net(n + T + 2);
    for (int j = 0; j < n; ++j) {
        if (demand[j] <= 0) continue;
        if (win_from[j] > win_to[j]) return false; // unmet demand with an empty window
        net.add_arc(source, 1 + j, demand[j], demand[j]);
        for (int tau = win_from[j]; tau <= win_to[j]; ++tau)
            net.add_arc(1 + j, n + tau, 0, rate_mkwh_[j]);
    }
    for (int tau = 1; tau <= T; ++tau) {
        const auto [lo, hi] = slot_bounds[tau - 1];
        net.add_arc(n + tau, sink, lo, hi);
    }
    return net.feasible(source, sink);
}

bool EvAggregator::has_feasible_completion(const State& s) const {
    if (num_admissible_levels_ == 0) return false;
    const int t = s.next_slot;
    if (t > time_.horizon_T + 1) return false;
    bool any_demand = false;
    const int n = static_cast<int>(sessions_.size());
    std::vector<int> wf(n), wt(n);
    for (int j = 0; j < n; ++j) {
        wf[j] = std::max(sessions_[j].arrival, t);
        wt[j] = sessions_[j].departure;
        if (s.remaining[j] > 0) {
            any_demand = true;
            if (wf[j] > wt[j]) return false;
        }
    }
    if (t > time_.horizon_T) return !any_demand;
    if (!any_demand && free_lo_mkwh_ == 0) return true;
    std::vector<std::pair<core::MilliKwh, core::MilliKwh>> bounds(time_.horizon_T, {0, 0});
    for (int tau = t; tau <= time_.horizon_T; ++tau)
        bounds[tau - 1] = {free_lo_mkwh_, free_hi_mkwh_};
    return flow_feasible(s.remaining, wf, wt, bounds);
}

std::string EvAggregator::memo_key(const State& s) const {
    const int t = s.next_slot;
    std::vector<std::array<std::int64_t, 3>> triples;
    for (std::size_t j = 0; j < sessions_.size(); ++j) {
        if (s.remaining[j] <= 0 || sessions_[j].arrival > t) continue;
        triples.push_back({s.remaining[j], sessions_[j].departure, rate_mkwh_[j]});
    }
    std::sort(triples.begin(), triples.end());
    std::string key;
    key.reserve((1 + 3 * triples.size()) * sizeof(std::int64_t));
    append_i64(key, t);
    for (const auto& tr : triples)
        for (std::int64_t v : tr) append_i64(key, v);
    return key;
}

bool EvAggregator::is_admissible(std::span<const int> prefix) const {
    const int T = time_.horizon_T;
    if (static_cast<int>(prefix.size()) > T)
        throw InvalidInputError("prefix longer than the horizon");
    if (num_admissible_levels_ == 0) return false;
    std::vector<std::pair<core::MilliKwh, core::MilliKwh>> bounds(T, {free_lo_mkwh_, free_hi_mkwh_});
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const int level = prefix[i];
        if (level < 0 || level >= grid_.size())
            throw InvalidInputError("prefix contains an action level out of range");
        if (!level_within_cap(level)) return false;
        bounds[i] = {level_mkwh_[level], level_mkwh_[level]};
    }
    const int n = static_cast<int>(sessions_.size());
    std::vector<int> wf(n), wt(n);
    for (int j = 0; j < n; ++j) {
        wf[j] = sessions_[j].arrival;
        wt[j] = sessions_[j].departure;
    }
    return flow_feasible(energy_mkwh_, wf, wt, bounds);
}

bool EvAggregator::is_complete_feasible(std::span<const int> traj) const {
    if (static_cast<int>(traj.size()) != time_.horizon_T)
        throw InvalidInputError("trajectory length does not match the horizon");
    return is_admissible(traj);
}

} // namespace flexloop::ev
