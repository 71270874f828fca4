#ifndef LATPARK_CONFIG_HPP
#define LATPARK_CONFIG_HPP

// Run configuration: one JSON document with sections vehicle, offsets,
// sensors, lqr, calibration, scenario and an output_dir. The vehicle section
// is mandatory and complete; every other key falls back to its default.
// Unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "latpark/control.hpp"
#include "latpark/error.hpp"
#include "latpark/harness.hpp"

namespace latpark {

struct RunConfig {
    Scenario scenario;  // carries vehicle, offsets, sensors and calibration
    LqrConfig lqr;
    std::string output_dir = "out";

    void validate() const {
        scenario.validate();
        lqr.validate();
    }
};

namespace detail {

using nlohmann::json;

/// Reads keys out of one JSON object, remembering which were consumed so
/// leftovers can be reported.
class SectionReader {
public:
    SectionReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    template <class T>
    void get(const char* key, T& out, bool required = false) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            if (required) throw ConfigError(qualify(key), "required key is missing");
            return;
        }
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ConfigError(qualify(key), "expected a number");
                out = it->template get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ConfigError(qualify(key), "expected true or false");
                out = it->template get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_unsigned())
                    throw ConfigError(qualify(key), "expected a non-negative integer");
                out = it->template get<T>();
            } else {
                out = it->template get<T>();
            }
        } catch (const json::exception& e) {
            throw ConfigError(qualify(key), e.what());
        }
    }

    /// Optional double where JSON null means +infinity.
    void get_unbounded(const char* key, double& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        if (it->is_null()) {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        if (!it->is_number()) throw ConfigError(qualify(key), "expected a number or null");
        out = it->get<double>();
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(qualify(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_vehicle(const json& j, VehicleParams& v) {
    SectionReader r(j, "vehicle");
    r.get("wheelbase_L", v.wheelbase_L, true);
    r.get("tau", v.tau, true);
    r.get("max_front_angle", v.max_front_angle, true);
    r.get("max_front_angle_rate", v.max_front_angle_rate, true);
    r.get("control_period_dt", v.control_period_dt, true);
    r.finish();
}

inline void read_offsets(const json& j, OffsetSet& o) {
    SectionReader r(j, "offsets");
    r.get("steer_offset_delta_o", o.steer_offset_delta_o);
    r.get("imu_heading_offset_h_o", o.imu_heading_offset_h_o);
    r.get("imu_x_offset", o.imu_x_offset);
    r.get("imu_y_offset", o.imu_y_offset);
    r.finish();
}

inline void read_sensors(const json& j, SensorConfig& s) {
    SectionReader r(j, "sensors");
    r.get("lidar_noise_std", s.lidar_noise_std);
    r.get("lidar_rate", s.lidar_rate);
    r.get("lidar_delay", s.lidar_delay);
    r.get("heading_noise_std", s.heading_noise_std);
    r.get("heading_delay", s.heading_delay);
    std::string mode = to_string(s.lateral_feedback_mode);
    r.get("lateral_feedback_mode", mode);
    try {
        s.lateral_feedback_mode = lateral_mode_from_string(mode);
    } catch (const ContractViolation& e) {
        throw ConfigError("sensors.lateral_feedback_mode", e.what());
    }
    r.get("degraded_lateral_noise_std", s.degraded_lateral_noise_std);
    r.get("degraded_lateral_delay", s.degraded_lateral_delay);
    r.finish();
}

inline void read_lqr(const json& j, LqrConfig& l) {
    SectionReader r(j, "lqr");
    r.get("q_lat", l.q_lat);
    r.get("q_heading", l.q_heading);
    r.get("q_delta", l.q_delta);
    r.get("r_cmd", l.r_cmd);
    r.get("riccati_tol", l.riccati_tol);
    r.get("riccati_max_iter", l.riccati_max_iter);
    r.get("gain_speed_grid", l.gain_speed_grid);
    r.finish();
}

inline void read_calibration(const json& j, CalibrationConfig& c) {
    SectionReader r(j, "calibration");
    r.get("min_speed", c.gate.min_speed);
    r.get_unbounded("max_yaw_rate", c.gate.max_yaw_rate);
    r.get("y_offset_assumed", c.y_offset_assumed);
    r.get("initial_covariance", c.initial_covariance);
    r.get("forgetting_factor", c.forgetting_factor);
    r.get("min_samples", c.min_samples);
    r.finish();
}

inline void read_scenario(const json& j, Scenario& s) {
    SectionReader r(j, "scenario");
    if (const json* init = r.child("initial_state")) {
        SectionReader ir(*init, "scenario.initial_state");
        ir.get("x", s.initial_state.x);
        ir.get("y", s.initial_state.y);
        ir.get("psi", s.initial_state.psi);
        ir.finish();
    }
    r.get("initial_lateral_jitter", s.initial_lateral_jitter);
    if (const json* prof = r.child("speed_profile")) {
        if (!prof->is_array()) throw ConfigError("scenario.speed_profile", "expected an array of [t, v] pairs");
        std::vector<SpeedProfile::Knot> knots;
        for (std::size_t i = 0; i < prof->size(); ++i) {
            const auto& k = (*prof)[i];
            if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
                throw ConfigError("scenario.speed_profile[" + std::to_string(i) + "]", "expected [t, v]");
            knots.push_back({k[0].get<double>(), k[1].get<double>()});
        }
        s.speed_profile = SpeedProfile(std::move(knots));
    }
    if (const json* b = r.child("board")) {
        SectionReader br(*b, "scenario.board");
        br.get("start_x", s.board.start_x);
        br.get("length", s.board.length);
        br.get("lateral_offset_from_line", s.board.lateral_offset_from_line);
        br.finish();
    }
    r.get("calibration_enabled", s.calibration_enabled);
    r.get("pre_calibration_run", s.pre_calibration_run);
    if (const json* w = r.child("weave")) {
        SectionReader wr(*w, "scenario.weave");
        wr.get("duration", s.weave.duration);
        wr.get("steer_amplitude", s.weave.steer_amplitude);
        wr.get("steer_period", s.weave.steer_period);
        wr.get("speed_mean", s.weave.speed_mean);
        wr.get("speed_amplitude", s.weave.speed_amplitude);
        wr.get("speed_period", s.weave.speed_period);
        wr.finish();
    }
    r.get("ruler_noise", s.ruler_noise);
    r.get("ruler_half_width", s.ruler_half_width);
    r.get("stop_hold", s.stop_hold);
    r.get("trial_count", s.trial_count);
    r.get("seed", s.seed);
    r.finish();
}

}  // namespace detail

/// Build a RunConfig from a parsed document and validate it.
inline RunConfig config_from_json(const nlohmann::json& doc) {
    using detail::SectionReader;
    RunConfig cfg;
    SectionReader root(doc, "");
    const auto* vehicle = root.child("vehicle");
    if (!vehicle) throw ConfigError("vehicle", "required section is missing");
    detail::read_vehicle(*vehicle, cfg.scenario.vehicle);
    if (const auto* j = root.child("offsets")) detail::read_offsets(*j, cfg.scenario.true_offsets);
    if (const auto* j = root.child("sensors")) detail::read_sensors(*j, cfg.scenario.sensors);
    if (const auto* j = root.child("lqr")) detail::read_lqr(*j, cfg.lqr);
    if (const auto* j = root.child("calibration")) detail::read_calibration(*j, cfg.scenario.calibration);
    if (const auto* j = root.child("scenario")) detail::read_scenario(*j, cfg.scenario);
    root.get("output_dir", cfg.output_dir);
    root.finish();
    try {
        cfg.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError("", std::string("invalid configuration: ") + e.what());
    }
    return cfg;
}

/// Full echo of every setting; config_from_json(to_json(c)) reproduces c.
inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const Scenario& s = c.scenario;
    json profile = json::array();
    for (const auto& k : s.speed_profile.knots()) profile.push_back({k.t, k.v});
    const double yaw = s.calibration.gate.max_yaw_rate;
    return {
        {"vehicle",
         {{"wheelbase_L", s.vehicle.wheelbase_L},
          {"tau", s.vehicle.tau},
          {"max_front_angle", s.vehicle.max_front_angle},
          {"max_front_angle_rate", s.vehicle.max_front_angle_rate},
          {"control_period_dt", s.vehicle.control_period_dt}}},
        {"offsets",
         {{"steer_offset_delta_o", s.true_offsets.steer_offset_delta_o},
          {"imu_heading_offset_h_o", s.true_offsets.imu_heading_offset_h_o},
          {"imu_x_offset", s.true_offsets.imu_x_offset},
          {"imu_y_offset", s.true_offsets.imu_y_offset}}},
        {"sensors",
         {{"lidar_noise_std", s.sensors.lidar_noise_std},
          {"lidar_rate", s.sensors.lidar_rate},
          {"lidar_delay", s.sensors.lidar_delay},
          {"heading_noise_std", s.sensors.heading_noise_std},
          {"heading_delay", s.sensors.heading_delay},
          {"lateral_feedback_mode", to_string(s.sensors.lateral_feedback_mode)},
          {"degraded_lateral_noise_std", s.sensors.degraded_lateral_noise_std},
          {"degraded_lateral_delay", s.sensors.degraded_lateral_delay}}},
        {"lqr",
         {{"q_lat", c.lqr.q_lat},
          {"q_heading", c.lqr.q_heading},
          {"q_delta", c.lqr.q_delta},
          {"r_cmd", c.lqr.r_cmd},
          {"riccati_tol", c.lqr.riccati_tol},
          {"riccati_max_iter", c.lqr.riccati_max_iter},
          {"gain_speed_grid", c.lqr.gain_speed_grid}}},
        {"calibration",
         {{"min_speed", s.calibration.gate.min_speed},
          {"max_yaw_rate", std::isfinite(yaw) ? json(yaw) : json(nullptr)},
          {"y_offset_assumed", s.calibration.y_offset_assumed},
          {"initial_covariance", s.calibration.initial_covariance},
          {"forgetting_factor", s.calibration.forgetting_factor},
          {"min_samples", s.calibration.min_samples}}},
        {"scenario",
         {{"initial_state", {{"x", s.initial_state.x}, {"y", s.initial_state.y}, {"psi", s.initial_state.psi}}},
          {"initial_lateral_jitter", s.initial_lateral_jitter},
          {"speed_profile", profile},
          {"board",
           {{"start_x", s.board.start_x},
            {"length", s.board.length},
            {"lateral_offset_from_line", s.board.lateral_offset_from_line}}},
          {"calibration_enabled", s.calibration_enabled},
          {"pre_calibration_run", s.pre_calibration_run},
          {"weave",
           {{"duration", s.weave.duration},
            {"steer_amplitude", s.weave.steer_amplitude},
            {"steer_period", s.weave.steer_period},
            {"speed_mean", s.weave.speed_mean},
            {"speed_amplitude", s.weave.speed_amplitude},
            {"speed_period", s.weave.speed_period}}},
          {"ruler_noise", s.ruler_noise},
          {"ruler_half_width", s.ruler_half_width},
          {"stop_hold", s.stop_hold},
          {"trial_count", s.trial_count},
          {"seed", s.seed}}},
        {"output_dir", c.output_dir},
    };
}

/// Apply a `dotted.path=value` override. The value is parsed as JSON when
/// possible (numbers, booleans, arrays) and taken as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("", "override '" + assignment + "' is not of the form key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(path, "empty path component in override");
        if (!node->is_object()) throw ConfigError(path, "override walks into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
        start = dot + 1;
    }
}

/// Parse text into a document; syntax errors report line and column.
inline nlohmann::json parse_config_text(const std::string& text, const std::string& origin = "config") {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", origin + ": " + e.what());
    }
}

inline nlohmann::json load_config_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    auto doc = load_config_document(path);
    for (const auto& o : overrides) apply_override(doc, o);
    return config_from_json(doc);
}

}  // namespace latpark

#endif  // LATPARK_CONFIG_HPP
