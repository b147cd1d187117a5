#include "flexloop/ev/session.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "flexloop/errors.hpp"

namespace flexloop::ev {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional part (ignored)
// and an optional trailing "Z". Returns seconds since the Unix epoch, UTC.
bool parse_iso8601(const std::string& s, std::int64_t& out) {
    std::tm tm{};
    std::istringstream is(s);
    is >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
    if (is.fail()) return false;
    std::string rest;
    is >> rest;
    if (!rest.empty() && rest != "Z") {
        if (rest[0] == '.') {
            std::size_t i = 1;
            while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
            if (i != rest.size() && rest.substr(i) != "Z") return false;
        } else {
            return false;
        }
    }
    const time_t t = timegm(&tm);
    if (t == static_cast<time_t>(-1)) return false;
    out = static_cast<std::int64_t>(t);
    return true;
}

} // namespace

std::vector<ChargingSession> screen_sessions(std::vector<ChargingSession> sessions,
                                             const core::TimeGrid& time,
                                             InfeasibleDemandPolicy policy,
                                             SessionIngestReport& report) {
    std::vector<ChargingSession> kept;
    kept.reserve(sessions.size());
    for (ChargingSession& s : sessions) {
        if (s.arrival < 1 || s.departure > time.horizon_T || s.departure < s.arrival) {
            report.issues.push_back({s.id, 0, "charging window lies outside the horizon", true});
            continue;
        }
        if (!(s.energy_kwh > 0.0)) {
            report.issues.push_back({s.id, 0, "energy demand must be positive", true});
            continue;
        }
        if (!(s.peak_rate_kw > 0.0)) {
            report.issues.push_back({s.id, 0, "peak rate must be positive", true});
            continue;
        }
        const core::MilliKwh demand = core::to_mkwh(s.energy_kwh);
        const core::MilliKwh cap = core::to_mkwh(s.window_capacity_kwh(time.slot_hours));
        if (demand > cap) {
            if (policy == InfeasibleDemandPolicy::reject) {
                report.issues.push_back(
                    {s.id, 0, "demand exceeds what the window can deliver at peak rate", true});
                continue;
            }
            std::ostringstream msg;
            msg << "demand " << s.energy_kwh << " kWh exceeds window capacity "
                << core::from_mkwh(cap) << " kWh; clipped";
            report.issues.push_back({s.id, 0, msg.str(), false});
            s.energy_kwh = core::from_mkwh(cap);
            ++report.clipped;
            if (!(s.energy_kwh > 0.0)) {
                report.issues.push_back({s.id, 0, "window capacity is zero", true});
                continue;
            }
        }
        kept.push_back(std::move(s));
    }
    report.rows_kept = static_cast<int>(kept.size());
    return kept;
}

std::vector<ChargingSession> load_sessions_csv(const std::string& path,
                                               const core::TimeGrid& time,
                                               const CsvTimeConfig& time_config,
                                               InfeasibleDemandPolicy policy,
                                               SessionIngestReport& report) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sessions file: " + path);

    const bool iso = time_config.format == CsvTimeConfig::Format::iso8601;
    std::int64_t t0_sec = 0;
    std::int64_t slot_sec = 0;
    if (iso) {
        if (time_config.t0_iso.empty())
            throw InvalidInputError("iso8601 session times need a grid origin timestamp");
        if (!parse_iso8601(time_config.t0_iso, t0_sec))
            throw InvalidInputError("cannot parse grid origin timestamp: " + time_config.t0_iso);
        slot_sec = std::llround(time.slot_hours * 3600.0);
        if (slot_sec <= 0) throw InvalidInputError("slot duration too small for iso8601 times");
    }

    std::string line;
    if (!std::getline(in, line))
        return screen_sessions({}, time, policy, report); // empty file: no sessions
    {
        auto header = split_csv(trim(line));
        const std::vector<std::string> expected = {"session_id", "arrival", "departure",
                                                   "energy_kwh", "peak_rate_kw"};
        if (header != expected)
            throw InvalidInputError("sessions file must start with the header "
                                    "'session_id,arrival,departure,energy_kwh,peak_rate_kw'");
    }

    std::vector<ChargingSession> rows;
    std::set<std::string> seen_ids;
    int row_no = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        ++row_no;
        ++report.rows_read;
        auto fields = split_csv(line);
        if (fields.size() != 5) {
            report.issues.push_back({"", row_no, "expected 5 fields, got " +
                                     std::to_string(fields.size()), true});
            continue;
        }
        ChargingSession s;
        s.id = fields[0];
        if (s.id.empty()) {
            report.issues.push_back({"", row_no, "empty session_id", true});
            continue;
        }
        if (!seen_ids.insert(s.id).second) {
            report.issues.push_back({s.id, row_no, "duplicate session_id", true});
            continue;
        }

        bool clamped = false;
        if (iso) {
            std::int64_t a_sec = 0, d_sec = 0;
            if (!parse_iso8601(fields[1], a_sec) || !parse_iso8601(fields[2], d_sec)) {
                report.issues.push_back({s.id, row_no, "cannot parse iso8601 timestamp", true});
                continue;
            }
            const std::int64_t a_off = a_sec - t0_sec;
            const std::int64_t d_off = d_sec - t0_sec;
            // Arrival rounds up to the first fully-available slot, departure
            // rounds down to the last fully-available one.
            const std::int64_t a_slot = (a_off % slot_sec == 0)
                                            ? floor_div(a_off, slot_sec) + 1
                                            : floor_div(a_off, slot_sec) + 2;
            const std::int64_t d_slot = floor_div(d_off, slot_sec);
            if (a_slot > std::numeric_limits<int>::max() || d_slot < std::numeric_limits<int>::min()) {
                report.issues.push_back({s.id, row_no, "timestamp far outside the horizon", true});
                continue;
            }
            s.arrival = static_cast<int>(std::max<std::int64_t>(a_slot, std::numeric_limits<int>::min()));
            s.departure = static_cast<int>(std::min<std::int64_t>(d_slot, std::numeric_limits<int>::max()));
        } else {
            double a_raw = 0.0, d_raw = 0.0;
            if (!parse_double(fields[1], a_raw) || !parse_double(fields[2], d_raw)) {
                report.issues.push_back({s.id, row_no, "cannot parse slot index", true});
                continue;
            }
            s.arrival = static_cast<int>(std::ceil(a_raw - 1e-9));
            s.departure = static_cast<int>(std::floor(d_raw + 1e-9));
        }
        if (s.departure < 1 || s.arrival > time.horizon_T) {
            report.issues.push_back({s.id, row_no, "charging window entirely outside the horizon", true});
            continue;
        }
        if (s.arrival < 1) { s.arrival = 1; clamped = true; }
        if (s.departure > time.horizon_T) { s.departure = time.horizon_T; clamped = true; }
        if (s.arrival > s.departure) {
            report.issues.push_back({s.id, row_no, "arrival is after departure once quantized", true});
            continue;
        }
        if (clamped)
            report.issues.push_back({s.id, row_no, "charging window clamped to the horizon", false});

        if (!parse_double(fields[3], s.energy_kwh) || !(s.energy_kwh > 0.0)) {
            report.issues.push_back({s.id, row_no, "energy_kwh must be a positive number", true});
            continue;
        }
        if (!parse_double(fields[4], s.peak_rate_kw) || !(s.peak_rate_kw > 0.0)) {
            report.issues.push_back({s.id, row_no, "peak_rate_kw must be a positive number", true});
            continue;
        }
        rows.push_back(std::move(s));
    }
    return screen_sessions(std::move(rows), time, policy, report);
}

double total_demand_kwh(const std::vector<ChargingSession>& sessions) {
    double sum = 0.0;
    for (const auto& s : sessions) sum += s.energy_kwh;
    return sum;
}

} // namespace flexloop::ev
