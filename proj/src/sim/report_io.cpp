#include "flexloop/sim/report_io.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "flexloop/errors.hpp"

namespace flexloop::sim {

using nlohmann::json;

std::string current_timestamp_utc() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    return out;
}

json scenario_summary(const Scenario& sc) {
    json j;
    j["horizon_T"] = sc.time.horizon_T;
    j["slot_duration_hours"] = sc.time.slot_hours;
    j["action_levels_kw"] = sc.grid.levels_kw();
    if (sc.grid.cap_xi_kwh()) j["operational_cap_kwh"] = *sc.grid.cap_xi_kwh();
    j["cost_kind"] = sc.costs.kind() == core::CostSchedule::Kind::linear ? "linear" : "tabulated";
    j["session_count"] = sc.sessions.size();
    j["total_demand_kwh"] = ev::total_demand_kwh(sc.sessions);
    return j;
}

} // namespace

void write_run_report_json(const std::string& path, const RunReport& report,
                           const Scenario& scenario, const ReportMeta& meta) {
    json j;
    j["schema"] = 1;
    j["meta"]["tool_version"] = meta.tool_version;
    j["meta"]["generated_at"] = meta.generated_at;
    j["meta"]["scenario_path"] = meta.scenario_path;
    if (!meta.sessions_path.empty()) j["meta"]["sessions_path"] = meta.sessions_path;
    j["meta"]["seed"] = meta.seed;
    j["meta"]["literal_mpe"] = meta.literal_mpe;
    j["scenario"] = scenario_summary(scenario);

    json run;
    run["episode_id"] = report.episode_id;
    run["controller"] = report.controller;
    run["provider"] = report.provider;
    run["param"] = report.param;
    run["seed"] = report.seed;
    run["total_cost"] = report.total_cost;
    run["mse"] = report.mse;
    run["mpe"] = report.mpe;
    run["feasible"] = report.feasible;
    run["completed"] = report.completed;
    if (!report.failure.empty()) run["failure"] = report.failure;

    json records = json::array();
    for (const auto& rec : report.records) {
        json r;
        r["t"] = rec.t;
        r["level"] = rec.level;
        r["u_kw"] = rec.action_kw;
        r["cost_increment"] = rec.cost_increment;
        r["requested_kwh"] = rec.requested_kwh;
        r["delivered_kwh"] = rec.delivered_kwh;
        r["residual_kwh"] = rec.residual_kwh;
        if (!rec.feedback.probs.empty()) r["feedback_probs"] = rec.feedback.probs;
        records.push_back(std::move(r));
    }
    run["records"] = std::move(records);
    j["run"] = std::move(run);

    auto out = open_out(path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing report: " + path);
}

void write_steps_csv(const std::string& path, const RunReport& report) {
    auto out = open_out(path);
    out << "t,u_kw,delivered_kwh,cost_increment,residual_kwh\n";
    for (const auto& rec : report.records) {
        out << rec.t << ',' << format_double(rec.action_kw) << ','
            << format_double(rec.delivered_kwh) << ',' << format_double(rec.cost_increment)
            << ',' << format_double(rec.residual_kwh) << '\n';
    }
    if (!out) throw IoError("failed writing per-step csv: " + path);
}

void write_batch_csv(const std::string& path, const std::vector<BatchRow>& rows) {
    auto out = open_out(path);
    out << "controller,beta,cost,mpe,mse\n";
    for (const auto& r : rows) {
        out << r.controller << ',' << format_double(r.beta) << ',' << format_double(r.cost)
            << ',' << format_double(r.mpe) << ',' << format_double(r.mse) << '\n';
    }
    if (!out) throw IoError("failed writing batch csv: " + path);
}

} // namespace flexloop::sim
