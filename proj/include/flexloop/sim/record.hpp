#pragma once

#include <string>
#include <vector>

#include "flexloop/mef/feedback.hpp"

namespace flexloop::sim {

// One closed-loop iteration: the feedback the operator saw, the action it
// took, and what the aggregator delivered.
struct ControlRecord {
    int t = 0;
    int level = 0;
    double action_kw = 0.0;
    mef::FlexibilityFeedback feedback; // empty probs when the run used no provider
    double cost_increment = 0.0;
    double requested_kwh = 0.0;
    double delivered_kwh = 0.0;
    double residual_kwh = 0.0; // requested - delivered, nonnegative under LLF
    std::vector<double> per_session_kwh;
};

struct RunReport {
    std::string episode_id;
    std::string controller;
    std::string provider; // "exact", "sampled", "none"
    double param = 0.0;   // beta for PPC, gamma for MPC, scale for offline rows
    std::uint64_t seed = 0;

    double total_cost = 0.0;
    double mse = 0.0;
    double mpe = 0.0;
    bool feasible = false;  // completed with exact tracking and all demands met
    bool completed = false; // reached the horizon without aborting
    std::string failure;    // diagnostic when a run aborted or errored
    std::vector<ControlRecord> records;
};

} // namespace flexloop::sim
