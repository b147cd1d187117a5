#include "flexloop/ctrl/ppc.hpp"

#include <cmath>

#include "flexloop/errors.hpp"

namespace flexloop::ctrl {

double PpcConfig::beta_at(int t) const {
    if (beta.empty()) throw InvalidInputError("beta schedule is empty");
    if (beta.size() == 1) return beta.front();
    if (t < 1 || t > static_cast<int>(beta.size()))
        throw InvalidInputError("beta schedule has no entry for slot " + std::to_string(t));
    return beta[t - 1];
}

int ppc_step(const mef::FlexibilityFeedback& feedback, const core::CostSchedule& costs,
             const core::ActionGrid& grid, double slot_hours, const PpcConfig& config, int t) {
    if (static_cast<int>(feedback.probs.size()) != grid.size())
        throw InvalidInputError("feedback length does not match the action grid");
    const double beta = config.beta_at(t);
    if (!(beta > 0.0)) throw InvalidInputError("beta must be positive");
    if (feedback.dead_end())
        throw InfeasibleError("dead-end feedback at slot " + std::to_string(t) +
                              ": no feasible continuation");

    int best = -1;
    double best_obj = 0.0;
    for (int a = 0; a < grid.size(); ++a) {
        const double p = feedback.probs[a];
        if (!(p > 0.0)) continue; // zero-probability levels are excluded outright
        const double obj = costs.at(t, a, grid.level_kw(a), slot_hours) - beta * std::log(p);
        if (best < 0 || obj < best_obj) {
            best = a;
            best_obj = obj;
        } else if (obj == best_obj &&
                   config.tie_break == PpcTieBreak::highest_prob_then_lowest_level &&
                   p > feedback.probs[best]) {
            best = a;
        }
    }
    if (best < 0)
        throw InfeasibleError("dead-end feedback at slot " + std::to_string(t) +
                              ": no feasible continuation");
    return best;
}

} // namespace flexloop::ctrl
