#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <gmpxx.h>

#include "flexloop/core/model.hpp"
#include "flexloop/errors.hpp"
#include "flexloop/mef/feedback.hpp"

namespace flexloop::mef {

// Exact trajectory counting and maximum-entropy feedback by memoized
// depth-first enumeration. A trajectory is counted when every slot's
// commanded energy is deliverable exactly at that slot and all demands end
// fully met; each counted trajectory is therefore realizable by the
// aggregator's own disaggregation rule, and feedback probabilities are the
// exact ratios of continuation counts.
//
// The memo table is keyed on the oracle's canonical reduced state, so two
// prefixes reaching the same reduced state share one subtree count. Counts
// are arbitrary-precision integers; probabilities are exact rationals,
// converted to double only in the returned feedback vector.
//
// Thread safety: concurrent calls on one instance share the memo under a
// mutex. Counts are exact, so results do not depend on interleaving.
template <core::ConstraintOracle O>
class ExactCounter {
public:
    static constexpr std::uint64_t kDefaultNodeBudget = 10'000'000;

    explicit ExactCounter(const O& oracle, std::uint64_t node_budget = kDefaultNodeBudget)
        : oracle_(oracle), budget_(node_budget) {}

    // |S(prefix)|: feasible full trajectories extending the prefix. A prefix
    // that already breaks exact tracking has zero continuations.
    mpz_class count_prefix(std::span<const int> prefix) {
        std::uint64_t nodes = 0;
        typename O::State s = oracle_.initial_state();
        if (!replay(prefix, s)) return 0;
        mpz_class c = count_state(s, nodes);
        note_nodes(nodes);
        return c;
    }

    mpz_class count_total() { return count_prefix({}); }

    // Feedback for the slot following the prefix: child counts per level,
    // exact rational probabilities, dead-end marker when the prefix has no
    // feasible continuation.
    MefResult mef_prefix(std::span<const int> prefix) {
        const int levels = oracle_.num_levels();
        MefResult r;
        r.parent_count = 0;
        r.child_counts.assign(levels, mpz_class(0));
        r.probs_exact.assign(levels, mpq_class(0));
        r.feedback.probs.assign(levels, 0.0);
        r.feedback.provenance = FlexibilityFeedback::Provenance::exact;

        typename O::State s = oracle_.initial_state();
        if (!replay(prefix, s)) return r;

        std::uint64_t nodes = 0;
        if (s.next_slot > oracle_.horizon()) {
            // Full-length prefix: report membership, no next slot to rate.
            r.parent_count = oracle_.has_feasible_completion(s) ? 1 : 0;
            note_nodes(nodes);
            return r;
        }
        for (int a = 0; a < levels; ++a) {
            if (!oracle_.can_apply(s, a)) continue;
            r.child_counts[a] = count_state(oracle_.advance_state(s, a), nodes);
            r.parent_count += r.child_counts[a];
        }
        note_nodes(nodes);
        if (r.parent_count == 0) return r; // dead end: all-zero marker stands
        for (int a = 0; a < levels; ++a) {
            r.probs_exact[a] = mpq_class(r.child_counts[a], r.parent_count);
            r.probs_exact[a].canonicalize();
            r.feedback.probs[a] = r.probs_exact[a].get_d();
        }
        return r;
    }

    // log |S| in nats. The log of an arbitrary-precision count is assembled
    // from its mantissa and binary exponent, so it stays accurate for
    // counts far beyond double range.
    double system_capacity() {
        mpz_class c = count_total();
        if (c == 0) throw InfeasibleError("system capacity undefined: feasible set is empty");
        return log_mpz(c);
    }

    // Entropy of the feedback chain, accumulated exactly over the memoized
    // prefix tree: H(s) = sum_a p_a * (-log p_a + H(child_a)). Equals
    // system_capacity up to floating-point rounding.
    double chain_entropy() {
        std::uint64_t nodes = 0;
        typename O::State s = oracle_.initial_state();
        mpz_class c = count_state(s, nodes);
        if (c == 0) throw InfeasibleError("chain entropy undefined: feasible set is empty");
        double h = entropy_state(s, nodes);
        note_nodes(nodes);
        return h;
    }

    std::uint64_t last_nodes_visited() const {
        std::lock_guard<std::mutex> g(mu_);
        return last_nodes_;
    }

    static double log_mpz(const mpz_class& c) {
        long exp2 = 0;
        const double mant = mpz_get_d_2exp(&exp2, c.get_mpz_t());
        return std::log(mant) + static_cast<double>(exp2) * std::log(2.0);
    }

private:
    bool replay(std::span<const int> prefix, typename O::State& s) const {
        if (static_cast<int>(prefix.size()) > oracle_.horizon())
            throw InvalidInputError("prefix longer than the horizon");
        for (int u : prefix) {
            if (u < 0 || u >= oracle_.num_levels())
                throw InvalidInputError("prefix contains an action level out of range");
            if (!oracle_.can_apply(s, u)) return false;
            s = oracle_.advance_state(s, u);
        }
        return true;
    }

    mpz_class count_state(const typename O::State& s, std::uint64_t& nodes) {
        if (++nodes > budget_)
            throw BudgetError("enumeration exceeded the node budget of " +
                              std::to_string(budget_) + " visited states");
        if (s.next_slot > oracle_.horizon())
            return oracle_.has_feasible_completion(s) ? 1 : 0;

        const std::string key = oracle_.memo_key(s);
        {
            std::lock_guard<std::mutex> g(mu_);
            auto it = memo_.find(key);
            if (it != memo_.end()) return it->second;
        }
        mpz_class total = 0;
        if (oracle_.has_feasible_completion(s)) {
            const int levels = oracle_.num_levels();
            for (int a = 0; a < levels; ++a) {
                if (!oracle_.can_apply(s, a)) continue;
                total += count_state(oracle_.advance_state(s, a), nodes);
            }
        }
        std::lock_guard<std::mutex> g(mu_);
        memo_.emplace(key, total);
        return total;
    }

    double entropy_state(const typename O::State& s, std::uint64_t& nodes) {
        if (s.next_slot > oracle_.horizon()) return 0.0;
        const std::string key = oracle_.memo_key(s);
        {
            std::lock_guard<std::mutex> g(mu_);
            auto it = entropy_memo_.find(key);
            if (it != entropy_memo_.end()) return it->second;
        }
        const mpz_class parent = count_state(s, nodes);
        double h = 0.0;
        if (parent > 0) {
            const int levels = oracle_.num_levels();
            for (int a = 0; a < levels; ++a) {
                if (!oracle_.can_apply(s, a)) continue;
                typename O::State child = oracle_.advance_state(s, a);
                const mpz_class ca = count_state(child, nodes);
                if (ca == 0) continue;
                mpq_class p(ca, parent);
                p.canonicalize();
                const double pd = p.get_d();
                h += pd * (-std::log(pd) + entropy_state(child, nodes));
            }
        }
        std::lock_guard<std::mutex> g(mu_);
        entropy_memo_.emplace(key, h);
        return h;
    }

    void note_nodes(std::uint64_t nodes) {
        std::lock_guard<std::mutex> g(mu_);
        last_nodes_ = nodes;
    }

    const O& oracle_;
    std::uint64_t budget_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, mpz_class> memo_;
    std::unordered_map<std::string, double> entropy_memo_;
    std::uint64_t last_nodes_ = 0;
};

} // namespace flexloop::mef
