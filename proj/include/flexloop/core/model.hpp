#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flexloop/errors.hpp"

namespace flexloop::core {

// Slots are 1-based: t = 1..horizon_T. A slot covers slot_hours of wall time.
struct TimeGrid {
    int horizon_T = 0;
    double slot_hours = 1.0;
};

// Energies are tracked internally in integer milli-kWh so that feasibility
// and conservation checks are exact.
using MilliKwh = std::int64_t;

inline MilliKwh to_mkwh(double kwh) {
    return static_cast<MilliKwh>(std::llround(kwh * 1000.0));
}

inline double from_mkwh(MilliKwh mkwh) {
    return static_cast<double>(mkwh) / 1000.0;
}

// Discrete set of aggregate power levels (kW), strictly increasing. Actions
// are level indices everywhere inside the library; kW values appear only at
// the I/O boundary. The optional cap xi limits the energy a single slot may
// command (kWh).
class ActionGrid {
public:
    ActionGrid() = default;
    ActionGrid(std::vector<double> levels_kw, std::optional<double> cap_xi_kwh = std::nullopt)
        : levels_kw_(std::move(levels_kw)), cap_xi_kwh_(cap_xi_kwh) {}

    int size() const { return static_cast<int>(levels_kw_.size()); }
    double level_kw(int index) const { return levels_kw_.at(index); }
    const std::vector<double>& levels_kw() const { return levels_kw_; }
    const std::optional<double>& cap_xi_kwh() const { return cap_xi_kwh_; }

    // Energy commanded by level `index` over one slot.
    MilliKwh level_energy_mkwh(int index, double slot_hours) const {
        return to_mkwh(levels_kw_.at(index) * slot_hours);
    }

    // Index whose kW value matches `kw` within tolerance, or -1.
    int index_of_kw(double kw, double tol = 1e-6) const {
        for (int i = 0; i < size(); ++i) {
            if (std::abs(levels_kw_[i] - kw) <= tol) return i;
        }
        return -1;
    }

    // Largest index whose slot energy does not exceed `energy_mkwh`;
    // falls back to index 0 when even the lowest level exceeds it.
    int round_down_to_level(MilliKwh energy_mkwh, double slot_hours) const {
        int best = 0;
        for (int i = 0; i < size(); ++i) {
            if (level_energy_mkwh(i, slot_hours) <= energy_mkwh) best = i;
        }
        return best;
    }

private:
    std::vector<double> levels_kw_;
    std::optional<double> cap_xi_kwh_;
};

// Per-slot action costs. Linear costs are prices in currency per kWh applied
// to the delivered energy level_kw * slot_hours; tabulated costs give the
// value per grid level directly.
class CostSchedule {
public:
    enum class Kind { linear, tabulated };

    CostSchedule() = default;

    static CostSchedule linear(std::vector<double> prices_per_kwh) {
        CostSchedule s;
        s.kind_ = Kind::linear;
        s.prices_ = std::move(prices_per_kwh);
        return s;
    }

    // One row of |levels| values per slot.
    static CostSchedule tabulated(std::vector<std::vector<double>> per_slot_values) {
        CostSchedule s;
        s.kind_ = Kind::tabulated;
        s.table_ = std::move(per_slot_values);
        return s;
    }

    Kind kind() const { return kind_; }
    int horizon() const {
        return kind_ == Kind::linear ? static_cast<int>(prices_.size())
                                     : static_cast<int>(table_.size());
    }
    const std::vector<double>& prices() const { return prices_; }
    const std::vector<std::vector<double>>& table() const { return table_; }

    // Cost of playing grid index `level` (value `level_kw`) in slot t (1-based).
    double at(int t, int level, double level_kw, double slot_hours) const {
        if (t < 1 || t > horizon()) {
            throw InvalidInputError("cost lookup outside horizon: t=" + std::to_string(t));
        }
        if (kind_ == Kind::linear) {
            return prices_[t - 1] * level_kw * slot_hours;
        }
        return table_[t - 1].at(level);
    }

private:
    Kind kind_ = Kind::linear;
    std::vector<double> prices_;
    std::vector<std::vector<double>> table_;
};

// Actions as grid indices. A prefix has length <= T, a full trajectory
// exactly T.
using Trajectory = std::vector<int>;

// Total cost of a full trajectory: sum of per-slot costs.
double evaluate_cost(const CostSchedule& costs, const ActionGrid& grid,
                     const Trajectory& traj, double slot_hours);

// Cost of a prefix (first `traj.size()` slots) -- used by split-additivity
// checks and by incremental accounting in the harness.
double evaluate_cost_prefix(const CostSchedule& costs, const ActionGrid& grid,
                            std::span<const int> prefix, double slot_hours);

// Contract every constraint model must satisfy to drive enumeration,
// rollouts and controllers. States are value types; `advance` is
// deterministic; prefix admissibility is monotone (a complete feasible
// trajectory is admissible at every prefix length).
template <typename O>
concept ConstraintOracle = requires(const O& o, const typename O::State& s, int level,
                                    std::span<const int> traj) {
    typename O::State;
    { o.horizon() } -> std::convertible_to<int>;
    { o.num_levels() } -> std::convertible_to<int>;
    { o.initial_state() } -> std::same_as<typename O::State>;
    { o.advance_state(s, level) } -> std::same_as<typename O::State>;
    // True when slot s.next_slot can deliver exactly the commanded energy.
    { o.can_apply(s, level) } -> std::convertible_to<bool>;
    // True when some completion of the remaining slots exists from s.
    { o.has_feasible_completion(s) } -> std::convertible_to<bool>;
    // Canonical reduced-state key; states with equal keys share continuations.
    { o.memo_key(s) } -> std::convertible_to<std::string>;
    { o.is_admissible(traj) } -> std::convertible_to<bool>;
    { o.is_complete_feasible(traj) } -> std::convertible_to<bool>;
};

} // namespace flexloop::core
