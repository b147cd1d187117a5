#pragma once

#include <string>
#include <vector>

#include "flexloop/scenario.hpp"
#include "flexloop/sim/harness.hpp"
#include "flexloop/sim/record.hpp"

namespace flexloop::sim {

// Stamped into every JSON report under "meta". generated_at is the only
// field excluded from byte-level determinism comparisons.
struct ReportMeta {
    std::string tool_version;
    std::string generated_at;
    std::string scenario_path;
    std::string sessions_path;
    std::uint64_t seed = 0;
    bool literal_mpe = false;
};

std::string current_timestamp_utc();

// JSON RunReport, schema 1. Keys are emitted in sorted order and doubles
// in shortest round-trip form, so identical runs serialize identically.
void write_run_report_json(const std::string& path, const RunReport& report,
                           const Scenario& scenario, const ReportMeta& meta);

// Per-step CSV: t,u_kw,delivered_kwh,cost_increment,residual_kwh.
void write_steps_csv(const std::string& path, const RunReport& report);

struct BatchRow {
    std::string controller;
    double beta = 0.0; // the swept parameter: beta, gamma or demand scale
    double cost = 0.0;
    double mpe = 0.0;
    double mse = 0.0;
};

// Aggregate CSV: controller,beta,cost,mpe,mse.
void write_batch_csv(const std::string& path, const std::vector<BatchRow>& rows);

// Fixed-format double used in all CSV output (round-trippable, locale-free).
std::string format_double(double v);

} // namespace flexloop::sim
