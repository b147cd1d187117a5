#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexloop/ctrl/mpc.hpp"
#include "flexloop/ctrl/offline.hpp"
#include "flexloop/ctrl/ppc.hpp"
#include "flexloop/errors.hpp"
#include "flexloop/ev/aggregator.hpp"
#include "flexloop/ev/session.hpp"
#include "flexloop/mef/exact.hpp"
#include "flexloop/scenario.hpp"
#include "flexloop/sim/harness.hpp"
#include "flexloop/sim/report_io.hpp"

namespace {

constexpr const char* kVersion = "flexctl 1.0.0";

using namespace flexloop;
using nlohmann::json;

struct GlobalOpts {
    std::string scenario_path;
    std::string sessions_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int jobs = 1;
    std::uint64_t node_budget = mef::ExactCounter<ev::EvAggregator>::kDefaultNodeBudget;
    bool literal_mpe = false;
    bool permissive_deadend = false;
};

struct Instance {
    Scenario scenario;
    std::vector<ev::ChargingSession> sessions; // screened
    ev::SessionIngestReport ingest;
};

void print_ingest_warnings(const ev::SessionIngestReport& rep) {
    for (const auto& issue : rep.issues) {
        std::cerr << "warning: session"
                  << (issue.session_id.empty() ? "" : " '" + issue.session_id + "'");
        if (issue.row > 0) std::cerr << " (row " << issue.row << ")";
        std::cerr << ": " << issue.reason << (issue.fatal ? " [dropped]" : "") << "\n";
    }
}

// Loads scenario + sessions and enforces the scenario rules. Violations and
// strict-mode ingestion failures raise InvalidInputError (exit 1).
Instance load_instance(const GlobalOpts& g) {
    if (g.scenario_path.empty()) throw InvalidInputError("--scenario is required");
    Instance inst;
    inst.scenario = load_scenario_json(g.scenario_path);
    const auto violations = validate_scenario(inst.scenario);
    if (!violations.empty()) {
        std::string msg = "scenario is invalid:";
        for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
        throw InvalidInputError(msg);
    }
    if (!g.sessions_path.empty()) {
        inst.sessions = ev::load_sessions_csv(g.sessions_path, inst.scenario.time,
                                              inst.scenario.csv_time,
                                              inst.scenario.demand_policy, inst.ingest);
    } else {
        inst.ingest.rows_read = static_cast<int>(inst.scenario.sessions.size());
        inst.sessions = ev::screen_sessions(inst.scenario.sessions, inst.scenario.time,
                                            inst.scenario.demand_policy, inst.ingest);
    }
    print_ingest_warnings(inst.ingest);
    if (inst.scenario.demand_policy == ev::InfeasibleDemandPolicy::reject &&
        inst.ingest.has_fatal())
        throw InvalidInputError("sessions rejected under strict demand policy");
    // The aggregator sees exactly the screened sessions.
    inst.scenario.sessions = inst.sessions;
    return inst;
}

std::vector<double> linear_prices_or_throw(const Scenario& sc, const char* who) {
    if (sc.costs.kind() != core::CostSchedule::Kind::linear)
        throw InvalidInputError(std::string(who) + " needs linear costs");
    return sc.costs.prices();
}

std::filesystem::path ensure_out_dir(const GlobalOpts& g) {
    std::filesystem::path dir(g.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + g.out_dir);
    return dir;
}

sim::ReportMeta make_meta(const GlobalOpts& g) {
    sim::ReportMeta meta;
    meta.tool_version = kVersion;
    meta.generated_at = sim::current_timestamp_utc();
    meta.scenario_path = g.scenario_path;
    meta.sessions_path = g.sessions_path;
    meta.seed = g.seed;
    meta.literal_mpe = g.literal_mpe;
    return meta;
}

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> out;
    if (count < 1 || !(lo > 0.0) || !(hi >= lo))
        throw InvalidInputError("bad beta grid: need 0 < min <= max and count >= 1");
    if (count == 1) return {lo};
    for (int i = 0; i < count; ++i)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    return out;
}

// Replays a precomputed trajectory through the closed loop so the report
// carries the same record structure as online controllers.
class FixedTrajectoryController final : public sim::Controller {
public:
    FixedTrajectoryController(core::Trajectory traj, std::string name)
        : traj_(std::move(traj)), name_(std::move(name)) {}
    int decide(int t, const mef::FlexibilityFeedback&, const ev::EvState&) override {
        return traj_.at(t - 1);
    }
    std::string name() const override { return name_; }

private:
    core::Trajectory traj_;
    std::string name_;
};

struct RunCmdOpts {
    std::string controller;
    std::string provider; // "", "exact", "sampled", "none"
    double beta = 1.0;
    std::vector<double> beta_schedule;
    double gamma = 1.0;
    int samples = 100;
    std::string tie_break = "lowest-level";
};

int cmd_run(const GlobalOpts& g, const RunCmdOpts& o) {
    Instance inst = load_instance(g);
    ev::EvAggregator agg(inst.scenario.time, inst.scenario.grid, inst.sessions);
    const double xi = sim::default_xi_kwh(agg.grid(), agg.slot_hours());
    const auto out_dir = ensure_out_dir(g);

    std::string provider_name = o.provider;
    if (provider_name.empty()) provider_name = (o.controller == "ppc") ? "exact" : "none";

    mef::ExactCounter<ev::EvAggregator> counter(agg, g.node_budget);
    std::unique_ptr<sim::FeedbackProvider> provider;
    if (provider_name == "exact") {
        provider = std::make_unique<sim::ExactProvider>(counter);
    } else if (provider_name == "sampled") {
        provider = std::make_unique<sim::SampledProvider>(agg, o.samples, g.seed);
    } else if (provider_name != "none") {
        throw InvalidInputError("unknown provider '" + provider_name + "'");
    }

    sim::RunOptions ropt;
    ropt.episode_id = "run";
    ropt.seed = g.seed;
    sim::RunReport rep;

    if (o.controller == "ppc") {
        ctrl::PpcConfig cfg;
        cfg.beta = o.beta_schedule.empty() ? std::vector<double>{o.beta} : o.beta_schedule;
        cfg.permissive_deadend = g.permissive_deadend;
        cfg.tie_break = o.tie_break == "highest-prob"
                            ? ctrl::PpcTieBreak::highest_prob_then_lowest_level
                            : ctrl::PpcTieBreak::lowest_level;
        if (!provider) throw InvalidInputError("ppc needs a feedback provider");
        sim::PpcController ppc(inst.scenario.costs, agg.grid(), agg.slot_hours(), cfg);
        ropt.param = o.beta;
        rep = sim::run_closed_loop(agg, inst.scenario.costs, provider.get(), ppc, ropt);
    } else if (o.controller == "mpc") {
        auto prices = linear_prices_or_throw(inst.scenario, "mpc");
        ctrl::MpcConfig cfg;
        cfg.gamma = o.gamma;
        sim::MpcController mpc(agg, prices, cfg);
        ropt.param = o.gamma;
        rep = sim::run_closed_loop(agg, inst.scenario.costs, provider.get(), mpc, ropt);
    } else if (o.controller == "offline-brute") {
        auto sol = ctrl::offline_optimal_bruteforce(agg, inst.scenario.costs, agg.grid(),
                                                    agg.slot_hours(), g.node_budget);
        FixedTrajectoryController fixed(sol.trajectory, "offline-brute");
        rep = sim::run_closed_loop(agg, inst.scenario.costs, provider.get(), fixed, ropt);
    } else if (o.controller == "offline-flow") {
        auto prices = linear_prices_or_throw(inst.scenario, "offline-flow");
        auto sol = ctrl::offline_optimal_flow(agg, prices);
        // Continuous plan: the report mirrors the plan's aggregates directly.
        rep.episode_id = ropt.episode_id;
        rep.controller = "offline-flow";
        rep.provider = "none";
        rep.seed = g.seed;
        rep.completed = true;
        rep.feasible = true;
        rep.total_cost = sol.cost;
        for (int t = 1; t <= agg.horizon(); ++t) {
            sim::ControlRecord rec;
            rec.t = t;
            rec.level = sol.trajectory[t - 1];
            rec.action_kw = sol.aggregates_kwh[t - 1] / agg.slot_hours();
            rec.cost_increment = prices[t - 1] * sol.aggregates_kwh[t - 1];
            rec.requested_kwh = sol.aggregates_kwh[t - 1];
            rec.delivered_kwh = sol.aggregates_kwh[t - 1];
            rec.residual_kwh = 0.0;
            rep.records.push_back(std::move(rec));
        }
    } else {
        throw InvalidInputError("unknown controller '" + o.controller +
                                "' (ppc, mpc, offline-brute, offline-flow)");
    }

    sim::finalize_metrics(rep, agg, xi, g.literal_mpe);
    sim::write_run_report_json((out_dir / "run.json").string(), rep, inst.scenario, make_meta(g));
    sim::write_steps_csv((out_dir / "steps.csv").string(), rep);
    std::cout << "controller=" << rep.controller << " cost=" << sim::format_double(rep.total_cost)
              << " mpe=" << sim::format_double(rep.mpe) << " mse=" << sim::format_double(rep.mse)
              << " feasible=" << (rep.feasible ? "true" : "false") << "\n";
    if (!rep.feasible) {
        if (!rep.failure.empty()) std::cerr << "infeasible: " << rep.failure << "\n";
        return 2;
    }
    return 0;
}

int cmd_mef(const GlobalOpts& g, const std::vector<int>& prefix) {
    Instance inst = load_instance(g);
    ev::EvAggregator agg(inst.scenario.time, inst.scenario.grid, inst.sessions);
    mef::ExactCounter<ev::EvAggregator> counter(agg, g.node_budget);

    auto mef_result = counter.mef_prefix(prefix);
    json j;
    j["schema"] = 1;
    j["prefix"] = prefix;
    j["parent_count"] = mef_result.parent_count.get_str();
    json counts = json::array();
    for (const auto& c : mef_result.child_counts) counts.push_back(c.get_str());
    j["counts"] = std::move(counts);
    j["probs"] = mef_result.feedback.probs;
    j["dead_end"] = mef_result.dead_end();
    const mpz_class total = counter.count_total();
    if (total > 0) {
        j["capacity_nats"] = counter.system_capacity();
        j["chain_entropy_nats"] = counter.chain_entropy();
    } else {
        j["capacity_nats"] = nullptr;
    }
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (g.out_dir != ".") {
        const auto out_dir = ensure_out_dir(g);
        std::ofstream f(out_dir / "mef.json");
        if (!f) throw IoError("cannot write mef.json");
        f << text;
    }
    return mef_result.dead_end() ? 2 : 0;
}

struct SweepCmdOpts {
    std::vector<double> betas;
    double beta_min = 1e-3, beta_max = 1e6;
    int beta_count = 24;
};

int cmd_sweep(const GlobalOpts& g, const SweepCmdOpts& o) {
    Instance inst = load_instance(g);
    ev::EvAggregator agg(inst.scenario.time, inst.scenario.grid, inst.sessions);
    const auto out_dir = ensure_out_dir(g);
    std::vector<double> betas =
        o.betas.empty() ? log_grid(o.beta_min, o.beta_max, o.beta_count) : o.betas;

    mef::ExactCounter<ev::EvAggregator> counter(agg, g.node_budget);
    auto rows = sim::beta_sweep(agg, inst.scenario.costs, counter, betas, g.literal_mpe, g.jobs);

    std::vector<sim::BatchRow> csv_rows;
    json jrows = json::array();
    for (const auto& r : rows) {
        csv_rows.push_back({"ppc", r.beta, r.cost, r.mpe, r.mse});
        json jr;
        jr["beta"] = r.beta;
        jr["cost"] = r.cost;
        jr["mpe"] = r.mpe;
        jr["mse"] = r.mse;
        jr["feasible"] = r.feasible;
        if (!r.failure.empty()) jr["failure"] = r.failure;
        jr["trajectory"] = r.trajectory;
        jrows.push_back(std::move(jr));
    }

    // Offline references: the exact grid optimum when affordable, and the
    // continuous lower bound always.
    json jref = json::object();
    try {
        auto brute = ctrl::offline_optimal_bruteforce(agg, inst.scenario.costs, agg.grid(),
                                                      agg.slot_hours(), g.node_budget);
        csv_rows.push_back({"offline-brute", 0.0, brute.cost, 0.0, 0.0});
        jref["brute_cost"] = brute.cost;
        jref["brute_trajectory"] = brute.trajectory;
    } catch (const Error& e) {
        jref["brute_error"] = e.what();
        std::cerr << "note: offline brute-force reference unavailable: " << e.what() << "\n";
    }
    if (inst.scenario.costs.kind() == core::CostSchedule::Kind::linear) {
        try {
            auto flow = ctrl::offline_optimal_flow(agg, inst.scenario.costs.prices());
            csv_rows.push_back({"offline-flow", 0.0, flow.cost, 0.0, 0.0});
            jref["flow_cost"] = flow.cost;
        } catch (const Error& e) {
            jref["flow_error"] = e.what();
        }
    }

    // Cost-vs-beta non-monotonicity is worth a look but is not an error.
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].feasible && rows[i - 1].feasible && rows[i].cost < rows[i - 1].cost - 1e-12)
            jrows[i]["cost_decreased_from_previous_beta"] = true;
    }

    sim::write_batch_csv((out_dir / "sweep.csv").string(), csv_rows);
    json doc;
    doc["schema"] = 1;
    const auto meta = make_meta(g);
    doc["meta"]["tool_version"] = meta.tool_version;
    doc["meta"]["generated_at"] = meta.generated_at;
    doc["meta"]["scenario_path"] = meta.scenario_path;
    doc["meta"]["seed"] = meta.seed;
    doc["rows"] = std::move(jrows);
    doc["reference"] = std::move(jref);
    std::ofstream f(out_dir / "sweep.json");
    if (!f) throw IoError("cannot write sweep.json");
    f << doc.dump(2) << "\n";
    std::cout << "sweep: " << rows.size() << " beta rows written to "
              << (out_dir / "sweep.csv").string() << "\n";
    return 0;
}

struct CompareCmdOpts {
    std::vector<double> betas;
    std::vector<double> gammas;
    std::vector<double> scales;
};

int cmd_compare(const GlobalOpts& g, const CompareCmdOpts& o) {
    Instance inst = load_instance(g);
    ev::EvAggregator agg(inst.scenario.time, inst.scenario.grid, inst.sessions);
    const auto prices = linear_prices_or_throw(inst.scenario, "compare");
    const double xi = sim::default_xi_kwh(agg.grid(), agg.slot_hours());
    const double demand = ev::total_demand_kwh(agg.sessions());
    const auto out_dir = ensure_out_dir(g);

    std::vector<double> betas = o.betas.empty() ? log_grid(1e-3, 1e6, 24) : o.betas;
    std::vector<double> gammas = o.gammas;
    if (gammas.empty()) gammas = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> scales = o.scales;
    if (scales.empty())
        for (int i = 1; i <= 10; ++i) scales.push_back(0.1 * i);

    std::vector<sim::BatchRow> rows;
    json jrows = json::array();
    auto add_row = [&](const std::string& controller, double param, const sim::RunReport& rep) {
        rows.push_back({controller, param, rep.total_cost, rep.mpe, rep.mse});
        json jr;
        jr["controller"] = controller;
        jr["param"] = param;
        jr["cost"] = rep.total_cost;
        jr["mpe"] = rep.mpe;
        jr["mse"] = rep.mse;
        jr["feasible"] = rep.feasible;
        if (!rep.failure.empty()) jr["failure"] = rep.failure;
        jrows.push_back(std::move(jr));
    };

    mef::ExactCounter<ev::EvAggregator> counter(agg, g.node_budget);
    auto ppc_rows = sim::beta_sweep(agg, inst.scenario.costs, counter, betas, g.literal_mpe, g.jobs);
    for (const auto& r : ppc_rows) {
        sim::RunReport rep;
        rep.total_cost = r.cost;
        rep.mpe = r.mpe;
        rep.mse = r.mse;
        rep.feasible = r.feasible;
        rep.failure = r.failure;
        add_row("ppc", r.beta, rep);
    }

    for (double gamma : gammas) {
        ctrl::MpcConfig cfg;
        cfg.gamma = gamma;
        sim::MpcController mpc(agg, prices, cfg);
        sim::RunOptions ropt;
        ropt.episode_id = "mpc-gamma";
        ropt.param = gamma;
        ropt.seed = g.seed;
        ropt.keep_feedback = false;
        auto rep = sim::run_closed_loop(agg, inst.scenario.costs, nullptr, mpc, ropt);
        sim::finalize_metrics(rep, agg, xi, g.literal_mpe);
        add_row("mpc", gamma, rep);
    }

    for (double scale : scales) {
        if (!(scale > 0.0 && scale <= 1.0))
            throw InvalidInputError("offline demand scales must lie in (0, 1]");
        std::vector<ev::ChargingSession> scaled = agg.sessions();
        for (auto& s : scaled) s.energy_kwh *= scale;
        std::erase_if(scaled, [](const ev::ChargingSession& s) { return !(s.energy_kwh > 0.0); });
        ev::EvAggregator scaled_agg(inst.scenario.time, inst.scenario.grid, scaled);
        sim::RunReport rep;
        try {
            auto sol = ctrl::offline_optimal_flow(scaled_agg, prices);
            rep.total_cost = sol.cost;
            double delivered = 0.0;
            for (double a : sol.aggregates_kwh) delivered += a;
            rep.mpe = demand > 0.0 ? 1.0 - delivered / demand : 0.0;
            rep.mse = 0.0;
            rep.feasible = true;
        } catch (const Error& e) {
            rep.feasible = false;
            rep.failure = e.what();
        }
        add_row("offline", scale, rep);
    }

    sim::write_batch_csv((out_dir / "compare.csv").string(), rows);
    json doc;
    doc["schema"] = 1;
    const auto meta = make_meta(g);
    doc["meta"]["tool_version"] = meta.tool_version;
    doc["meta"]["generated_at"] = meta.generated_at;
    doc["meta"]["scenario_path"] = meta.scenario_path;
    doc["meta"]["seed"] = meta.seed;
    doc["rows"] = std::move(jrows);
    std::ofstream f(out_dir / "compare.json");
    if (!f) throw IoError("cannot write compare.json");
    f << doc.dump(2) << "\n";
    std::cout << "compare: " << rows.size() << " rows written to "
              << (out_dir / "compare.csv").string() << "\n";
    return 0;
}

int cmd_validate(const GlobalOpts& g) {
    if (g.scenario_path.empty()) throw InvalidInputError("--scenario is required");
    Scenario sc = load_scenario_json(g.scenario_path);
    const auto violations = validate_scenario(sc);
    ev::SessionIngestReport ingest;
    bool sessions_ok = true;
    try {
        if (!g.sessions_path.empty()) {
            ev::load_sessions_csv(g.sessions_path, sc.time, sc.csv_time, sc.demand_policy, ingest);
        } else {
            ingest.rows_read = static_cast<int>(sc.sessions.size());
            ev::screen_sessions(sc.sessions, sc.time, sc.demand_policy, ingest);
        }
    } catch (const Error& e) {
        sessions_ok = false;
        ingest.issues.push_back({"", 0, e.what(), true});
    }
    json j;
    j["schema"] = 1;
    j["valid"] = violations.empty() && sessions_ok &&
                 !(sc.demand_policy == ev::InfeasibleDemandPolicy::reject && ingest.has_fatal());
    json jv = json::array();
    for (const auto& v : violations) jv.push_back({{"field", v.field}, {"message", v.message}});
    j["violations"] = std::move(jv);
    json ji = json::array();
    for (const auto& i : ingest.issues)
        ji.push_back({{"session_id", i.session_id},
                      {"row", i.row},
                      {"reason", i.reason},
                      {"fatal", i.fatal}});
    j["session_issues"] = std::move(ji);
    j["sessions_read"] = ingest.rows_read;
    j["sessions_kept"] = ingest.rows_kept;
    j["sessions_clipped"] = ingest.clipped;
    std::cout << j.dump(2) << "\n";
    return j["valid"].get<bool>() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-loop flexibility control experiments: exact maximum-entropy "
                 "feedback, penalized predictive control, an MPC baseline and an "
                 "EV-charging aggregator."};
    app.fallthrough();
    GlobalOpts g;
    app.add_option("--scenario", g.scenario_path, "Scenario JSON file");
    app.add_option("--sessions", g.sessions_path, "Sessions CSV file (overrides inline sessions)");
    app.add_option("--out", g.out_dir, "Output directory for reports");
    app.add_option("--seed", g.seed, "Random seed for sampled feedback");
    app.add_option("--jobs", g.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--node-budget", g.node_budget, "Enumeration node budget");
    app.add_flag("--literal-mpe", g.literal_mpe,
                 "Divide the undelivered-energy metric by T as well (audit variant)");
    app.add_flag("--permissive-deadend", g.permissive_deadend,
                 "On dead-end feedback, fall back to the lowest level instead of aborting");

    RunCmdOpts ro;
    auto* run = app.add_subcommand("run", "Run one closed-loop episode");
    run->add_option("--controller", ro.controller, "ppc | mpc | offline-brute | offline-flow")
        ->required();
    run->add_option("--beta", ro.beta, "PPC tuning parameter");
    run->add_option("--beta-schedule", ro.beta_schedule, "Per-slot beta values")->delimiter(',');
    run->add_option("--gamma", ro.gamma, "MPC demand relaxation in [0,1]");
    run->add_option("--provider", ro.provider, "exact | sampled | none");
    run->add_option("--samples", ro.samples, "Dives per action for the sampled provider");
    run->add_option("--tie-break", ro.tie_break, "lowest-level | highest-prob");

    std::vector<int> mef_prefix;
    auto* mefc = app.add_subcommand("mef", "Print exact feedback for a committed prefix");
    mefc->add_option("--prefix", mef_prefix, "Committed action levels (grid indices)")
        ->delimiter(',');

    SweepCmdOpts so;
    auto* sweep = app.add_subcommand("sweep", "Closed-loop PPC across a beta grid");
    sweep->add_option("--betas", so.betas, "Explicit beta values")->delimiter(',');
    sweep->add_option("--beta-min", so.beta_min, "Log-grid lower end");
    sweep->add_option("--beta-max", so.beta_max, "Log-grid upper end");
    sweep->add_option("--beta-count", so.beta_count, "Log-grid point count");

    CompareCmdOpts co;
    auto* compare = app.add_subcommand("compare", "Cost-MPE curves: PPC vs MPC vs offline");
    compare->add_option("--betas", co.betas, "PPC beta values")->delimiter(',');
    compare->add_option("--gammas", co.gammas, "MPC gamma values")->delimiter(',');
    compare->add_option("--scales", co.scales, "Offline demand scales in (0,1]")->delimiter(',');

    auto* validate = app.add_subcommand("validate", "Check a scenario and sessions file");

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // argument problems fall under validation errors
    }

    try {
        if (run->parsed()) return cmd_run(g, ro);
        if (mefc->parsed()) return cmd_mef(g, mef_prefix);
        if (sweep->parsed()) return cmd_sweep(g, so);
        if (compare->parsed()) return cmd_compare(g, co);
        if (validate->parsed()) return cmd_validate(g);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const BudgetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
