#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/ev/session.hpp"

namespace flexloop::ev {

// Remaining demand per session plus the slot about to be controlled.
// Sessions that have not arrived yet keep their full demand; the session
// list itself lives in the aggregator.
struct EvState {
    int next_slot = 1;
    std::vector<core::MilliKwh> remaining;
};

// Outcome of disaggregating one aggregate action. `per_session_kwh` is
// aligned with the aggregator's session list (zeros for inactive sessions).
// When active demand saturates below the commanded energy the shortfall is
// reported as the residual rather than raised as an error, so tracking
// metrics can observe it.
struct DisaggregationResult {
    std::vector<double> per_session_kwh;
    double delivered_kwh = 0.0;
    double requested_kwh = 0.0;
    double residual_kwh() const { return requested_kwh - delivered_kwh; }
};

// EV-charging instance of the constraint model: least-laxity-first
// disaggregation for the state transition, and exact max-flow feasibility
// for admissibility. All feasibility arithmetic runs in integer milli-kWh.
//
// Free (uncommitted) slots enter the flow network with their aggregate
// value relaxed to the continuous range between the lowest and highest
// admissible grid level; committed slots are pinned exactly. The relaxation
// can only over-approximate admissibility when an off-grid interior value
// would be needed, and enumeration re-checks exact grid feasibility at
// every step, so counts remain exact.
class EvAggregator {
public:
    EvAggregator(core::TimeGrid time, core::ActionGrid grid,
                 std::vector<ChargingSession> sessions);

    using State = EvState;

    int horizon() const { return time_.horizon_T; }
    int num_levels() const { return grid_.size(); }
    double slot_hours() const { return time_.slot_hours; }
    const core::TimeGrid& time() const { return time_; }
    const core::ActionGrid& grid() const { return grid_; }
    const std::vector<ChargingSession>& sessions() const { return sessions_; }

    State initial_state() const;

    // Least-laxity-first allocation of the commanded energy, then the
    // clock tick; arrivals for the next slot are implicitly admitted.
    std::pair<State, DisaggregationResult> advance(const State& s, int level) const;
    State advance_state(const State& s, int level) const;

    // True when slot s.next_slot can absorb exactly the commanded energy:
    // the level respects the operational cap and active demand can soak it.
    bool can_apply(const State& s, int level) const;

    // True when the remaining demands can still be met from state s with
    // every future slot's aggregate inside the admissible range.
    bool has_feasible_completion(const State& s) const;

    // Canonical reduced state: slot index plus the sorted multiset of
    // (remaining energy, departure, rate) over arrived, unmet sessions.
    std::string memo_key(const State& s) const;

    // Whether a schedule over all T slots exists that tracks the committed
    // prefix exactly and can still meet every demand.
    bool is_admissible(std::span<const int> prefix) const;

    // Exact membership test for a full trajectory: per-slot tracking and
    // demand satisfaction, all values pinned.
    bool is_complete_feasible(std::span<const int> traj) const;

    // Sum of min(rate, remaining) over sessions active in s.next_slot.
    core::MilliKwh saturable_mkwh(const State& s) const;
    core::MilliKwh total_remaining_mkwh(const State& s) const;

    core::MilliKwh session_energy_mkwh(int j) const { return energy_mkwh_[j]; }
    core::MilliKwh session_rate_mkwh(int j) const { return rate_mkwh_[j]; }
    core::MilliKwh free_slot_lo_mkwh() const { return free_lo_mkwh_; }
    core::MilliKwh free_slot_hi_mkwh() const { return free_hi_mkwh_; }
    bool level_within_cap(int level) const;

private:
    bool flow_feasible(std::span<const core::MilliKwh> demand,
                       std::span<const int> win_from, std::span<const int> win_to,
                       std::span<const std::pair<core::MilliKwh, core::MilliKwh>> slot_bounds) const;

    core::TimeGrid time_;
    core::ActionGrid grid_;
    std::vector<ChargingSession> sessions_;
    std::vector<core::MilliKwh> energy_mkwh_;
    std::vector<core::MilliKwh> rate_mkwh_; // per-slot deliverable cap r * delta
    core::MilliKwh free_lo_mkwh_ = 0;
    core::MilliKwh free_hi_mkwh_ = 0;
    std::vector<core::MilliKwh> level_mkwh_;
    int num_admissible_levels_ = 0; // levels within the operational cap form a prefix
};

} // namespace flexloop::ev
