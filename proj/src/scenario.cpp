#include "flexloop/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flexloop/errors.hpp"

namespace flexloop {

using nlohmann::json;

namespace {

double require_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw InvalidInputError("scenario field '" + field + "' must be a number");
    return j.get<double>();
}

int require_int(const json& j, const std::string& field) {
    if (!j.is_number_integer())
        throw InvalidInputError("scenario field '" + field + "' must be an integer");
    return j.get<int>();
}

std::string require_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw InvalidInputError("scenario field '" + field + "' must be a string");
    return j.get<std::string>();
}

// A misplaced key (say, 'sessions' at the top level instead of under
// 'aggregator') would otherwise vanish silently and the run would proceed
// on an empty fleet.
void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool found = false;
        for (const char* k : known)
            if (key == k) { found = true; break; }
        if (!found)
            throw InvalidInputError("unknown scenario field '" + where + key + "'");
    }
}

} // namespace

Scenario load_scenario_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInputError(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InvalidInputError("scenario root must be a JSON object");
    reject_unknown_keys(doc,
                        {"horizon_T", "slot_duration_hours", "action_levels_kw",
                         "operational_cap_kwh", "costs", "aggregator"},
                        "");

    Scenario sc;
    if (!doc.contains("horizon_T")) throw InvalidInputError("scenario is missing 'horizon_T'");
    sc.time.horizon_T = require_int(doc["horizon_T"], "horizon_T");
    if (!doc.contains("slot_duration_hours"))
        throw InvalidInputError("scenario is missing 'slot_duration_hours'");
    sc.time.slot_hours = require_number(doc["slot_duration_hours"], "slot_duration_hours");

    if (!doc.contains("action_levels_kw") || !doc["action_levels_kw"].is_array())
        throw InvalidInputError("scenario field 'action_levels_kw' must be an array of numbers");
    std::vector<double> levels;
    for (const auto& v : doc["action_levels_kw"])
        levels.push_back(require_number(v, "action_levels_kw[]"));
    std::optional<double> cap;
    if (doc.contains("operational_cap_kwh"))
        cap = require_number(doc["operational_cap_kwh"], "operational_cap_kwh");
    sc.grid = core::ActionGrid(std::move(levels), cap);

    if (!doc.contains("costs") || !doc["costs"].is_object())
        throw InvalidInputError("scenario field 'costs' must be an object");
    const json& costs = doc["costs"];
    reject_unknown_keys(costs, {"kind", "values"}, "costs.");
    const std::string kind = costs.contains("kind") ? require_string(costs["kind"], "costs.kind") : "";
    if (!costs.contains("values") || !costs["values"].is_array())
        throw InvalidInputError("scenario field 'costs.values' must be an array");
    if (kind == "linear") {
        std::vector<double> prices;
        for (const auto& v : costs["values"]) prices.push_back(require_number(v, "costs.values[]"));
        sc.costs = core::CostSchedule::linear(std::move(prices));
    } else if (kind == "tabulated") {
        std::vector<std::vector<double>> table;
        for (const auto& row : costs["values"]) {
            if (!row.is_array())
                throw InvalidInputError("tabulated costs.values must be an array of per-slot arrays");
            std::vector<double> r;
            for (const auto& v : row) r.push_back(require_number(v, "costs.values[][]"));
            table.push_back(std::move(r));
        }
        sc.costs = core::CostSchedule::tabulated(std::move(table));
    } else {
        throw InvalidInputError("costs.kind must be 'linear' or 'tabulated'");
    }

    if (doc.contains("aggregator")) {
        const json& agg = doc["aggregator"];
        if (!agg.is_object()) throw InvalidInputError("scenario field 'aggregator' must be an object");
        reject_unknown_keys(agg, {"type", "infeasible_demand_policy", "csv_time", "sessions"},
                            "aggregator.");
        if (agg.contains("type")) {
            const std::string type = require_string(agg["type"], "aggregator.type");
            if (type != "ev")
                throw InvalidInputError("unsupported aggregator.type '" + type + "' (only 'ev')");
        }
        if (agg.contains("infeasible_demand_policy")) {
            const std::string p =
                require_string(agg["infeasible_demand_policy"], "aggregator.infeasible_demand_policy");
            if (p == "clip") sc.demand_policy = ev::InfeasibleDemandPolicy::clip;
            else if (p == "reject") sc.demand_policy = ev::InfeasibleDemandPolicy::reject;
            else throw InvalidInputError("aggregator.infeasible_demand_policy must be 'clip' or 'reject'");
        }
        if (agg.contains("csv_time")) {
            const json& ct = agg["csv_time"];
            if (!ct.is_object())
                throw InvalidInputError("aggregator.csv_time must be an object");
            reject_unknown_keys(ct, {"format", "t0"}, "aggregator.csv_time.");
            if (ct.contains("format")) {
                const std::string f = require_string(ct["format"], "aggregator.csv_time.format");
                if (f == "slots") sc.csv_time.format = ev::CsvTimeConfig::Format::slots;
                else if (f == "iso8601") sc.csv_time.format = ev::CsvTimeConfig::Format::iso8601;
                else throw InvalidInputError("aggregator.csv_time.format must be 'slots' or 'iso8601'");
            }
            if (ct.contains("t0")) sc.csv_time.t0_iso = require_string(ct["t0"], "aggregator.csv_time.t0");
        }
        if (agg.contains("sessions")) {
            if (!agg["sessions"].is_array())
                throw InvalidInputError("aggregator.sessions must be an array");
            for (const auto& js : agg["sessions"]) {
                if (!js.is_object())
                    throw InvalidInputError("aggregator.sessions entries must be objects");
                ev::ChargingSession s;
                if (!js.contains("id")) throw InvalidInputError("session entry is missing 'id'");
                s.id = require_string(js["id"], "sessions[].id");
                if (!js.contains("arrival") || !js.contains("departure"))
                    throw InvalidInputError("session '" + s.id + "' needs 'arrival' and 'departure'");
                s.arrival = require_int(js["arrival"], "sessions[].arrival");
                s.departure = require_int(js["departure"], "sessions[].departure");
                if (!js.contains("energy_kwh") || !js.contains("peak_rate_kw"))
                    throw InvalidInputError("session '" + s.id +
                                            "' needs 'energy_kwh' and 'peak_rate_kw'");
                s.energy_kwh = require_number(js["energy_kwh"], "sessions[].energy_kwh");
                s.peak_rate_kw = require_number(js["peak_rate_kw"], "sessions[].peak_rate_kw");
                sc.sessions.push_back(std::move(s));
            }
        }
    }
    return sc;
}

std::vector<ScenarioViolation> validate_scenario(const Scenario& sc) {
    std::vector<ScenarioViolation> out;
    const int T = sc.time.horizon_T;
    if (T < 1) out.push_back({"horizon_T", "must be at least 1"});
    if (!(sc.time.slot_hours > 0.0) || !std::isfinite(sc.time.slot_hours))
        out.push_back({"slot_duration_hours", "must be a positive finite number"});

    const auto& levels = sc.grid.levels_kw();
    if (levels.empty()) out.push_back({"action_levels_kw", "must contain at least one level"});
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!std::isfinite(levels[i]) || levels[i] < 0.0) {
            out.push_back({"action_levels_kw", "levels must be finite and nonnegative"});
            break;
        }
    }
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i] > levels[i - 1])) {
            out.push_back({"action_levels_kw", "levels must be strictly increasing"});
            break;
        }
    }
    if (sc.grid.cap_xi_kwh()) {
        const double xi = *sc.grid.cap_xi_kwh();
        if (!std::isfinite(xi) || !(xi > 0.0)) {
            out.push_back({"operational_cap_kwh", "must be a positive finite number"});
        } else if (!levels.empty() && sc.time.slot_hours > 0.0) {
            const core::MilliKwh xi_mkwh = core::to_mkwh(xi);
            if (core::to_mkwh(levels.front() * sc.time.slot_hours) > xi_mkwh)
                out.push_back({"operational_cap_kwh", "excludes every action level"});
        }
    }

    if (sc.costs.horizon() != T) {
        out.push_back({"costs.values", "cost length " + std::to_string(sc.costs.horizon()) +
                                           " does not match horizon_T " + std::to_string(T)});
    }
    if (sc.costs.kind() == core::CostSchedule::Kind::linear) {
        for (double p : sc.costs.prices()) {
            if (!std::isfinite(p) || p < 0.0) {
                out.push_back({"costs.values", "linear prices must be finite and nonnegative"});
                break;
            }
        }
    } else {
        bool shape_ok = true, value_ok = true;
        for (const auto& row : sc.costs.table()) {
            if (static_cast<int>(row.size()) != sc.grid.size()) shape_ok = false;
            for (double v : row)
                if (!std::isfinite(v) || v < 0.0) value_ok = false;
        }
        if (!shape_ok)
            out.push_back({"costs.values", "tabulated rows must have one value per action level"});
        if (!value_ok)
            out.push_back({"costs.values", "tabulated costs must be finite and nonnegative"});
    }

    std::set<std::string> ids;
    for (const auto& s : sc.sessions) {
        const std::string where = "aggregator.sessions['" + s.id + "']";
        if (s.id.empty()) out.push_back({"aggregator.sessions", "session id must not be empty"});
        else if (!ids.insert(s.id).second)
            out.push_back({where, "duplicate session id"});
        if (s.arrival < 1 || s.departure > T || s.departure < s.arrival)
            out.push_back({where, "charging window must satisfy 1 <= arrival <= departure <= horizon_T"});
        if (!std::isfinite(s.energy_kwh) || !(s.energy_kwh > 0.0))
            out.push_back({where, "energy_kwh must be positive"});
        if (!std::isfinite(s.peak_rate_kw) || !(s.peak_rate_kw > 0.0))
            out.push_back({where, "peak_rate_kw must be positive"});
        if (sc.demand_policy == ev::InfeasibleDemandPolicy::reject && s.arrival >= 1 &&
            s.departure <= T && s.departure >= s.arrival && s.energy_kwh > 0.0 &&
            s.peak_rate_kw > 0.0 && sc.time.slot_hours > 0.0) {
            if (core::to_mkwh(s.energy_kwh) >
                core::to_mkwh(s.window_capacity_kwh(sc.time.slot_hours)))
                out.push_back({where, "demand exceeds window capacity and policy is 'reject'"});
        }
    }
    return out;
}

} // namespace flexloop
