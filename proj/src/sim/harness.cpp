#include "flexloop/sim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "flexloop/errors.hpp"
#include "flexloop/ev/session.hpp"

namespace flexloop::sim {

int PpcController::decide(int t, const mef::FlexibilityFeedback& fb, const ev::EvState&) {
    if (fb.dead_end() && config_.permissive_deadend) {
        ++fallbacks_;
        return 0; // lowest level; the residual shows up in the metrics
    }
    return ctrl::ppc_step(fb, costs_, grid_, slot_hours_, config_, t);
}

RunReport run_closed_loop(const ev::EvAggregator& agg, const core::CostSchedule& costs,
                          FeedbackProvider* provider, Controller& controller,
                          const RunOptions& options) {
    RunReport rep;
    rep.episode_id = options.episode_id;
    rep.controller = controller.name();
    rep.provider = provider ? provider->name() : "none";
    rep.param = options.param;
    rep.seed = options.seed;

    const int T = agg.horizon();
    ev::EvState state = agg.initial_state();
    core::Trajectory prefix;
    prefix.reserve(T);
    bool tracked_exactly = true;

    for (int t = 1; t <= T; ++t) {
        mef::FlexibilityFeedback fb;
        if (provider) fb = provider->feedback(prefix);
        int level = 0;
        try {
            level = controller.decide(t, fb, state);
        } catch (const InfeasibleError& e) {
            rep.failure = e.what();
            rep.feasible = false;
            rep.completed = false;
            return rep;
        }
        auto [next, dis] = agg.advance(state, level);
        ControlRecord rec;
        rec.t = t;
        rec.level = level;
        rec.action_kw = agg.grid().level_kw(level);
        if (options.keep_feedback) rec.feedback = std::move(fb);
        rec.cost_increment = costs.at(t, level, rec.action_kw, agg.slot_hours());
        rec.requested_kwh = dis.requested_kwh;
        rec.delivered_kwh = dis.delivered_kwh;
        rec.residual_kwh = dis.residual_kwh();
        rec.per_session_kwh = std::move(dis.per_session_kwh);
        if (rec.residual_kwh != 0.0) tracked_exactly = false;
        rep.total_cost += rec.cost_increment;
        rep.records.push_back(std::move(rec));
        prefix.push_back(level);
        state = std::move(next);
    }
    rep.completed = true;
    rep.feasible = tracked_exactly && agg.total_remaining_mkwh(state) == 0;
    return rep;
}

double compute_mse(const std::vector<RunReport>& reports, int horizon_T, double xi_kwh) {
    if (reports.empty()) throw InvalidInputError("mse needs at least one report");
    if (!(xi_kwh > 0.0)) throw InvalidInputError("mse normalizer xi must be positive");
    if (horizon_T < 1) throw InvalidInputError("mse needs a positive horizon");
    double sum = 0.0;
    for (const auto& r : reports)
        for (const auto& rec : r.records) sum += rec.residual_kwh * rec.residual_kwh;
    return sum / (static_cast<double>(reports.size()) * horizon_T * xi_kwh);
}

double compute_mpe(const std::vector<RunReport>& reports, double total_demand_kwh,
                   int horizon_T, bool literal) {
    if (reports.empty()) throw InvalidInputError("mpe needs at least one report");
    if (!(total_demand_kwh > 0.0)) throw InvalidInputError("mpe needs positive total demand");
    if (horizon_T < 1) throw InvalidInputError("mpe needs a positive horizon");
    double delivered = 0.0;
    for (const auto& r : reports)
        for (const auto& rec : r.records) delivered += rec.delivered_kwh;
    double denom = static_cast<double>(reports.size()) * total_demand_kwh;
    if (literal) denom *= static_cast<double>(horizon_T);
    return 1.0 - delivered / denom;
}

double default_xi_kwh(const core::ActionGrid& grid, double slot_hours) {
    if (grid.cap_xi_kwh()) return *grid.cap_xi_kwh();
    if (grid.size() == 0) throw InvalidInputError("empty action grid");
    const double top = grid.level_kw(grid.size() - 1) * slot_hours;
    return top > 0.0 ? top : 1.0; // degenerate all-zero grid: any positive normalizer
}

void finalize_metrics(RunReport& report, const ev::EvAggregator& agg, double xi_kwh,
                      bool literal_mpe) {
    const std::vector<RunReport> one(1, report); // metrics over L = 1 episodes
    report.mse = compute_mse(one, agg.horizon(), xi_kwh);
    const double demand = ev::total_demand_kwh(agg.sessions());
    report.mpe = demand > 0.0 ? compute_mpe(one, demand, agg.horizon(), literal_mpe) : 0.0;
}

std::vector<RunReport> run_jobs(const std::vector<std::function<RunReport()>>& jobs,
                                int parallelism) {
    std::vector<RunReport> out(jobs.size());
    if (jobs.empty()) return out;
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                out[i] = jobs[i]();
            } catch (const Error& e) {
                out[i].feasible = false;
                out[i].completed = false;
                out[i].failure = e.what();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    return out;
}

std::vector<SweepRow> beta_sweep(const ev::EvAggregator& agg, const core::CostSchedule& costs,
                                 mef::ExactCounter<ev::EvAggregator>& counter,
                                 std::span<const double> betas, bool literal_mpe,
                                 int parallelism) {
    std::vector<std::function<RunReport()>> jobs;
    jobs.reserve(betas.size());
    const double xi = default_xi_kwh(agg.grid(), agg.slot_hours());
    for (std::size_t i = 0; i < betas.size(); ++i) {
        const double beta = betas[i];
        jobs.push_back([&, beta, i] {
            ExactProvider provider(counter);
            ctrl::PpcConfig cfg;
            cfg.beta = {beta};
            PpcController ppc(costs, agg.grid(), agg.slot_hours(), cfg);
            RunOptions opt;
            opt.episode_id = "beta-" + std::to_string(i);
            opt.param = beta;
            opt.keep_feedback = false;
            RunReport rep = run_closed_loop(agg, costs, &provider, ppc, opt);
            finalize_metrics(rep, agg, xi, literal_mpe);
            return rep;
        });
    }
    std::vector<RunReport> reports = run_jobs(jobs, parallelism);
    std::vector<SweepRow> rows;
    rows.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        SweepRow row;
        row.beta = betas[i];
        row.cost = reports[i].total_cost;
        row.mpe = reports[i].mpe;
        row.mse = reports[i].mse;
        row.feasible = reports[i].feasible;
        row.failure = reports[i].failure;
        for (const auto& rec : reports[i].records) row.trajectory.push_back(rec.level);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace flexloop::sim
