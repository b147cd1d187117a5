#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flexloop/core/model.hpp"
#include "flexloop/ctrl/mpc.hpp"
#include "flexloop/ctrl/ppc.hpp"
#include "flexloop/ev/aggregator.hpp"
#include "flexloop/mef/exact.hpp"
#include "flexloop/mef/sampled.hpp"
#include "flexloop/sim/record.hpp"

namespace flexloop::sim {

// Feedback side of the loop: maps the committed prefix to a flexibility
// vector. Implementations may share memoized enumeration state; feedback()
// must be safe to call from several runs at once.
class FeedbackProvider {
public:
    virtual ~FeedbackProvider() = default;
    virtual mef::FlexibilityFeedback feedback(std::span<const int> prefix) = 0;
    virtual std::string name() const = 0;
};

class ExactProvider final : public FeedbackProvider {
public:
    explicit ExactProvider(mef::ExactCounter<ev::EvAggregator>& counter) : counter_(counter) {}
    mef::FlexibilityFeedback feedback(std::span<const int> prefix) override {
        return counter_.mef_prefix(prefix).feedback;
    }
    std::string name() const override { return "exact"; }

private:
    mef::ExactCounter<ev::EvAggregator>& counter_;
};

class SampledProvider final : public FeedbackProvider {
public:
    SampledProvider(const ev::EvAggregator& agg, int sample_count, std::uint64_t seed)
        : impl_(agg, sample_count, seed) {}
    mef::FlexibilityFeedback feedback(std::span<const int> prefix) override {
        return impl_.feedback_for(prefix);
    }
    std::string name() const override { return "sampled"; }

private:
    mef::SampledMef<ev::EvAggregator> impl_;
};

// Operator side: picks the slot-t level from the feedback and/or state.
class Controller {
public:
    virtual ~Controller() = default;
    virtual int decide(int t, const mef::FlexibilityFeedback& feedback,
                       const ev::EvState& state) = 0;
    virtual std::string name() const = 0;
};

class PpcController final : public Controller {
public:
    PpcController(const core::CostSchedule& costs, const core::ActionGrid& grid,
                  double slot_hours, ctrl::PpcConfig config)
        : costs_(costs), grid_(grid), slot_hours_(slot_hours), config_(std::move(config)) {}

    int decide(int t, const mef::FlexibilityFeedback& fb, const ev::EvState&) override;
    std::string name() const override { return "ppc"; }
    int fallback_count() const { return fallbacks_; }

private:
    const core::CostSchedule& costs_;
    const core::ActionGrid& grid_;
    double slot_hours_;
    ctrl::PpcConfig config_;
    int fallbacks_ = 0;
};

class MpcController final : public Controller {
public:
    MpcController(const ev::EvAggregator& agg, std::vector<double> prices, ctrl::MpcConfig config)
        : agg_(agg), prices_(std::move(prices)), config_(config) {}

    int decide(int t, const mef::FlexibilityFeedback&, const ev::EvState& state) override {
        auto r = ctrl::mpc_step(agg_, state, prices_, config_, t);
        if (!r.feasible) ++infeasible_steps_;
        return r.level;
    }
    std::string name() const override { return "mpc"; }
    int infeasible_steps() const { return infeasible_steps_; }

private:
    const ev::EvAggregator& agg_;
    std::vector<double> prices_;
    ctrl::MpcConfig config_;
    int infeasible_steps_ = 0;
};

struct RunOptions {
    std::string episode_id = "run";
    double param = 0.0;
    std::uint64_t seed = 0;
    bool keep_feedback = true; // false drops feedback vectors from records to shrink reports
};

// One pass of the closed loop: per slot, feedback from the state so far,
// then the operator's action, then the aggregator's state advance and cost
// accumulation. A controller abort (dead end) yields a partial report with
// feasible = false. The provider may be null (MPC needs none).
RunReport run_closed_loop(const ev::EvAggregator& agg, const core::CostSchedule& costs,
                          FeedbackProvider* provider, Controller& controller,
                          const RunOptions& options);

// Tracking error normalized by L * T * xi, energies in kWh.
double compute_mse(const std::vector<RunReport>& reports, int horizon_T, double xi_kwh);

// Undelivered-energy fraction: 1 - delivered / (L * total demand); the
// literal variant divides by (L * T) * total demand instead.
double compute_mpe(const std::vector<RunReport>& reports, double total_demand_kwh,
                   int horizon_T, bool literal = false);

// Post-run summary metrics stamped into the report: per-run MSE/MPE with
// L = 1. Zero-demand instances get MPE 0 by convention.
void finalize_metrics(RunReport& report, const ev::EvAggregator& agg, double xi_kwh,
                      bool literal_mpe);

// The scenario's MSE normalizer: the operational cap when present, the
// top grid level's slot energy otherwise.
double default_xi_kwh(const core::ActionGrid& grid, double slot_hours);

// Runs jobs[i]() for every i on up to `jobs` threads; results keep index
// order, and a thrown error becomes a failure note on that report.
std::vector<RunReport> run_jobs(const std::vector<std::function<RunReport()>>& jobs,
                                int parallelism);

struct SweepRow {
    double beta = 0.0;
    double cost = 0.0;
    double mpe = 0.0;
    double mse = 0.0;
    bool feasible = false;
    std::string failure;
    core::Trajectory trajectory;
};

// Closed-loop PPC at each beta with shared exact feedback.
std::vector<SweepRow> beta_sweep(const ev::EvAggregator& agg, const core::CostSchedule& costs,
                                 mef::ExactCounter<ev::EvAggregator>& counter,
                                 std::span<const double> betas, bool literal_mpe,
                                 int parallelism);

} // namespace flexloop::sim
