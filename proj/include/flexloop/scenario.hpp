#pragma once

#include <string>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/ev/session.hpp"

namespace flexloop {

// Immutable problem instance: time grid, action grid, cost schedule, and
// the aggregator's session list with its ingestion settings. Sessions may
// be inline in the scenario file or supplied separately as CSV.
struct Scenario {
    core::TimeGrid time;
    core::ActionGrid grid;
    core::CostSchedule costs;
    ev::InfeasibleDemandPolicy demand_policy = ev::InfeasibleDemandPolicy::clip;
    ev::CsvTimeConfig csv_time;
    std::vector<ev::ChargingSession> sessions;
};

struct ScenarioViolation {
    std::string field;
    std::string message;
};

// Collects every rule the instance breaks; an empty list means valid.
// Never throws: malformed values become violations, not exceptions.
std::vector<ScenarioViolation> validate_scenario(const Scenario& sc);

// Reads the scenario JSON document. Structural problems (unreadable file,
// bad JSON, wrong field types) throw; semantic rules are left to
// validate_scenario so callers can report them all at once.
Scenario load_scenario_json(const std::string& path);

} // namespace flexloop
