#pragma once

#include <string>
#include <vector>

#include "flexloop/core/model.hpp"

namespace flexloop::ev {

// One charging session: connected from slot `arrival` through slot
// `departure` (inclusive, 1-based), requesting `energy_kwh` at a peak rate
// of `peak_rate_kw`.
struct ChargingSession {
    std::string id;
    int arrival = 1;
    int departure = 1;
    double energy_kwh = 0.0;
    double peak_rate_kw = 0.0;

    int window_slots() const { return departure - arrival + 1; }
    double window_capacity_kwh(double slot_hours) const {
        return window_slots() * peak_rate_kw * slot_hours;
    }
};

// What happens to demands that exceed their window capacity at load time.
enum class InfeasibleDemandPolicy { clip, reject };

struct SessionIngestIssue {
    std::string session_id;
    int row = 0; // 1-based data row, 0 when not from a file
    std::string reason;
    bool fatal = false; // fatal rows are dropped (or reject the scenario in strict mode)
};

struct SessionIngestReport {
    std::vector<SessionIngestIssue> issues;
    int rows_read = 0;
    int rows_kept = 0;
    int clipped = 0;

    bool has_fatal() const {
        for (const auto& i : issues)
            if (i.fatal) return true;
        return false;
    }
};

// How CSV timestamps map onto the time grid.
struct CsvTimeConfig {
    enum class Format { slots, iso8601 };
    Format format = Format::slots;
    // Origin for iso8601 mode; slot 1 starts here.
    std::string t0_iso;
};

// Parses `session_id,arrival,departure,energy_kwh,peak_rate_kw` rows.
// Arrival rounds up to the next full slot, departure rounds down; sessions
// whose demand exceeds the window capacity are clipped (and flagged) or
// rejected depending on `policy`. Malformed rows are reported and skipped.
std::vector<ChargingSession> load_sessions_csv(const std::string& path,
                                               const core::TimeGrid& time,
                                               const CsvTimeConfig& time_config,
                                               InfeasibleDemandPolicy policy,
                                               SessionIngestReport& report);

// Window-capacity screening applied to sessions from any source (CSV or
// scenario JSON). Returns the kept sessions.
std::vector<ChargingSession> screen_sessions(std::vector<ChargingSession> sessions,
                                             const core::TimeGrid& time,
                                             InfeasibleDemandPolicy policy,
                                             SessionIngestReport& report);

double total_demand_kwh(const std::vector<ChargingSession>& sessions);

} // namespace flexloop::ev
