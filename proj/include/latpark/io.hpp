#ifndef LATPARK_IO_HPP
#define LATPARK_IO_HPP

// Trial CSV logs, telemetry CSV ingestion, JSON report fragments and atomic
// file output.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "latpark/calibration.hpp"
#include "latpark/control.hpp"
#include "latpark/error.hpp"
#include "latpark/harness.hpp"

namespace latpark {

inline constexpr std::string_view kTrialCsvHeader =
    "t,x,y,psi,v,delta_actual,delta_cmd,meas_lat,meas_heading,theta0,theta1,theta2";

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_trial_csv(std::ostream& os, const TrialRecord& rec) {
    os << kTrialCsvHeader << '\n';
    for (const auto& r : rec.rows) {
        const double cols[] = {r.t, r.x, r.y, r.psi, r.v, r.delta_actual, r.delta_cmd,
                               r.meas_lat, r.meas_heading, r.theta0, r.theta1, r.theta2};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            if (i) os << ',';
            os << format_double(cols[i]);
        }
        os << '\n';
    }
}

inline std::string trial_csv_name(std::size_t index) {
    std::ostringstream os;
    os << "trial_" << std::setw(4) << std::setfill('0') << index << ".csv";
    return os.str();
}

/// Write via a sibling temp file and rename, so readers never see a partial
/// file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out.flush()) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

struct TelemetryLog {
    std::vector<TelemetrySample> rows;
};

/// Parse calibration telemetry. The header must name t, v2, omega, vx_body,
/// vy_body and delta_commanded (any order; extra columns are ignored).
/// Errors carry 1-based line numbers.
inline TelemetryLog read_telemetry_csv(std::istream& in) {
    static constexpr std::string_view kColumns[] = {"t", "v2", "omega", "vx_body", "vy_body", "delta_commanded"};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    if (lineno == 0 || line.find_first_not_of(" \t\r") == std::string::npos)
        throw Error("telemetry CSV is empty");

    const auto header = detail::split_csv(line);
    std::size_t index[std::size(kColumns)];
    for (std::size_t c = 0; c < std::size(kColumns); ++c) {
        const auto it = std::find(header.begin(), header.end(), kColumns[c]);
        if (it == header.end()) throw Error("telemetry CSV header is missing column '" + std::string(kColumns[c]) + "'");
        index[c] = static_cast<std::size_t>(it - header.begin());
    }

    TelemetryLog log;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = detail::split_csv(line);
        if (fields.size() != header.size())
            throw Error("telemetry CSV line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        double v[std::size(kColumns)];
        for (std::size_t c = 0; c < std::size(kColumns); ++c) {
            if (!detail::parse_double(fields[index[c]], v[c]))
                throw Error("telemetry CSV line " + std::to_string(lineno) + ": column '" +
                            std::string(kColumns[c]) + "' is not a finite number");
        }
        log.rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
    }
    if (log.rows.empty()) throw Error("telemetry CSV has no data rows");
    return log;
}

// ---- JSON fragments --------------------------------------------------------

using nlohmann::json;

/// NaN and infinity have no JSON spelling; they become null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const MetricStats& m) {
    return {{"mean", finite_or_null(m.mean)}, {"std", finite_or_null(m.std)}, {"count", m.count}};
}

inline json to_json(const AggregateStats& a) {
    return {{"trial_count", a.trial_count},
            {"std_degenerate", a.std_degenerate},
            {"front_lateral_error_cm", to_json(a.front)},
            {"rear_lateral_error_cm", to_json(a.rear)},
            {"lidar_lateral_error_cm", to_json(a.lidar)},
            {"heading_error_rad", to_json(a.heading)}};
}

inline json to_json(const StopMeasurement& m) {
    return {{"front_lateral_error_cm", m.front_lateral_error},
            {"rear_lateral_error_cm", m.rear_lateral_error},
            {"lidar_lateral_error_cm", finite_or_null(m.lidar_lateral_error)},
            {"heading_error_rad", m.heading_error},
            {"ruler_noise_applied", m.ruler_noise_applied}};
}

inline json to_json(const GainSchedule& g) {
    json rows = json::array();
    for (std::size_t i = 0; i < g.speeds().size(); ++i) {
        const auto& k = g.gains()[i];
        rows.push_back({{"speed", g.speeds()[i]}, {"K", {k[0], k[1], k[2]}}});
    }
    return rows;
}

inline json to_json(const RlsState& s, const CalibrationConfig& cfg) {
    const auto est = current_offsets(s, cfg);
    return {{"theta_hat", {s.theta_hat[0], s.theta_hat[1], s.theta_hat[2]}},
            {"sample_count", s.sample_count},
            {"low_confidence", est.low_confidence},
            {"steer_offset_delta_o", est.offsets.steer_offset_delta_o},
            {"imu_x_offset", est.offsets.imu_x_offset},
            {"imu_heading_offset_h_o", est.offsets.imu_heading_offset_h_o},
            {"imu_y_offset_assumed", cfg.y_offset_assumed}};
}

inline json to_json(const ReferenceRow& r) {
    auto opt = [](const std::optional<MetricStats>& m) { return m ? to_json(*m) : json(nullptr); };
    return {{"name", r.name},
            {"trials", r.trials},
            {"longitudinal_error_cm", opt(r.longitudinal)},
            {"front_lateral_error_cm", to_json(r.front)},
            {"rear_lateral_error_cm", to_json(r.rear)},
            {"lidar_lateral_error_cm", opt(r.lidar)},
            {"heading_error_rad", to_json(r.heading)}};
}

inline json reference_tables_json(const std::vector<ReferenceRow>& rows) {
    json out = {{"note", "field results from a real vehicle; constants, not reproduced by simulation"},
                {"tables", json::array()}};
    for (const auto& r : rows) out["tables"].push_back(to_json(r));
    return out;
}

inline json to_json(const ComparisonReport& r) {
    return {{"proposed", to_json(r.proposed)},
            {"degraded", to_json(r.degraded)},
            {"rear_std_ratio_degraded_over_proposed", finite_or_null(r.rear_std_ratio)},
            {"proposed_gate",
             {{"max_abs_rear_mean_cm", r.gate.max_abs_rear_mean_cm},
              {"max_rear_three_sigma_cm", r.gate.max_rear_three_sigma_cm},
              {"max_heading_std_rad", r.gate.max_heading_std_rad},
              {"rear_three_sigma_cm", 3.0 * r.proposed.rear.std},
              {"rear_mean_ok", r.proposed_gate.rear_mean_ok},
              {"rear_three_sigma_ok", r.proposed_gate.rear_three_sigma_ok},
              {"heading_std_ok", r.proposed_gate.heading_std_ok},
              {"passed", r.proposed_gate.passed()}}},
            {"references", reference_tables_json(r.references)}};
}

}  // namespace latpark

#endif  // LATPARK_IO_HPP
