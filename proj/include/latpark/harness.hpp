#ifndef LATPARK_HARNESS_HPP
#define LATPARK_HARNESS_HPP

// Bus-stop experiment: approach on localization feedback, switch to the LiDAR
// board once it is in view, decelerate to a full stop, then measure both axles
// against the lane line. Monte Carlo over independent trials and a
// side-by-side comparison against the field reference tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latpark/calibration.hpp"
#include "latpark/control.hpp"
#include "latpark/error.hpp"
#include "latpark/plant.hpp"
#include "latpark/random.hpp"
#include "latpark/sensing.hpp"

namespace latpark {

/// Piecewise-linear v(t) through (t, v) knots, holding the last speed after
/// the final knot.
class SpeedProfile {
public:
    struct Knot {
        double t;
        double v;
        friend bool operator==(const Knot&, const Knot&) = default;
    };

    SpeedProfile() = default;
    explicit SpeedProfile(std::vector<Knot> knots) : knots_(std::move(knots)) {}

    double at(double t) const {
        if (knots_.empty()) return 0.0;
        if (t <= knots_.front().t) return knots_.front().v;
        if (t >= knots_.back().t) return knots_.back().v;
        const auto hi = std::upper_bound(knots_.begin(), knots_.end(), t,
                                         [](double tt, const Knot& k) { return tt < k.t; });
        const auto lo = hi - 1;
        const double w = (t - lo->t) / (hi->t - lo->t);
        return lo->v + w * (hi->v - lo->v);
    }

    /// Time from which the profile stays at zero, or nullopt if it never stops.
    std::optional<double> stop_time() const {
        if (knots_.empty() || knots_.back().v != 0.0) return std::nullopt;
        std::size_t i = knots_.size() - 1;
        while (i > 0 && knots_[i - 1].v == 0.0) --i;
        return knots_[i].t;
    }

    void validate() const {
        if (knots_.empty()) throw ContractViolation("speed_profile must have at least one knot");
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            if (!(knots_[i].v >= 0.0)) throw ContractViolation("speed_profile speeds must be >= 0");
            if (i > 0 && !(knots_[i].t > knots_[i - 1].t))
                throw ContractViolation("speed_profile knot times must be strictly increasing");
        }
    }

    const std::vector<Knot>& knots() const { return knots_; }

private:
    std::vector<Knot> knots_;
};

/// Open-loop sinusoidal steering at a gently varying speed; excites yaw rate
/// for the calibration estimator.
struct WeaveManeuver {
    double duration = 20.0;           // s
    double steer_amplitude = 0.1;     // rad
    double steer_period = 4.0;        // s
    double speed_mean = 2.5;          // m/s
    double speed_amplitude = 0.5;     // m/s
    double speed_period = 7.0;        // s

    void validate() const {
        if (!(duration > 0.0 && steer_period > 0.0 && speed_period > 0.0))
            throw ContractViolation("weave duration and periods must be > 0");
        if (!(speed_mean - std::abs(speed_amplitude) > 0.0))
            throw ContractViolation("weave speed must stay positive");
    }
};

/// Drive the plant through a weave and log what the vehicle would record.
inline std::vector<TelemetrySample> synthesize_weave_telemetry(const VehicleParams& params,
                                                               const OffsetSet& truth,
                                                               const WeaveManeuver& weave) {
    weave.validate();
    const double dt = params.control_period_dt;
    const auto steps = static_cast<std::size_t>(std::llround(weave.duration / dt));
    std::vector<TelemetrySample> out;
    out.reserve(steps);
    VehicleState s;
    double lagged = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        s.t = t;
        s.v = weave.speed_mean + weave.speed_amplitude * std::sin(2.0 * kPi * t / weave.speed_period);
        s.front_angle_delta = lagged;
        const ImuReading imu = true_imu_reading(s, truth, params);
        out.push_back({t, imu.v2, imu.omega, imu.vx_body, imu.vy_body, lagged});
        const double cmd = weave.steer_amplitude * std::sin(2.0 * kPi * t / weave.steer_period);
        s = kinematic_step(s, params, truth);
        lagged = actuator_step(lagged, cmd, params);
    }
    return out;
}

struct Scenario {
    VehicleParams vehicle;
    OffsetSet true_offsets{0.5 * kPi / 180.0, 0.01, 0.3, 0.2};
    SensorConfig sensors;
    CalibrationConfig calibration;
    // Start 40 m before the stop point, which sits 12 m into the board.
    // initial_state.v is ignored; speed always follows speed_profile.
    VehicleState initial_state{-28.0, 0.0, 0.02, 2.78, 0.0, 0.0};
    double initial_lateral_jitter = 0.3;  // y0 += U(-jitter, jitter) per trial
    SpeedProfile speed_profile{{{0.0, 2.78}, {10.89, 2.78}, {17.89, 0.0}}};
    ReferenceBoard board;
    bool calibration_enabled = true;
    bool pre_calibration_run = true;
    WeaveManeuver weave;
    bool ruler_noise = false;
    double ruler_half_width = 0.01;  // m
    double stop_hold = 1.0;          // s at zero speed before measuring
    std::size_t trial_count = 40;
    std::uint64_t seed = 1;

    void validate() const {
        vehicle.validate();
        true_offsets.validate();
        sensors.validate();
        calibration.validate();
        board.validate();
        speed_profile.validate();
        if (pre_calibration_run) weave.validate();
        if (!speed_profile.stop_time())
            throw ContractViolation("speed_profile never reaches and holds 0; the trial would not stop");
        if (trial_count < 1) throw ContractViolation("trial_count must be >= 1");
        if (!(initial_lateral_jitter >= 0.0)) throw ContractViolation("initial_lateral_jitter must be >= 0");
        if (!(stop_hold >= 0.0)) throw ContractViolation("stop_hold must be >= 0");
        if (!(ruler_half_width >= 0.0)) throw ContractViolation("ruler_half_width must be >= 0");
    }
};

/// Field-style preset: LiDAR lateral feedback, weave pre-calibration, online
/// compensation on.
inline Scenario proposed_scenario() { return Scenario{}; }

/// Original pipeline: lateral error from localization, no calibration.
inline Scenario degraded_scenario() {
    Scenario s;
    s.sensors.lateral_feedback_mode = LateralFeedbackMode::kDegradedLocalization;
    s.calibration_enabled = false;
    s.pre_calibration_run = false;
    return s;
}

struct TrialRow {
    double t, x, y, psi, v;
    double delta_actual, delta_cmd;
    double meas_lat, meas_heading;
    double theta0, theta1, theta2;

    friend bool operator==(const TrialRow&, const TrialRow&) = default;
};

struct StopMeasurement {
    double front_lateral_error = 0.0;  // cm
    double rear_lateral_error = 0.0;   // cm
    double lidar_lateral_error = std::numeric_limits<double>::quiet_NaN();  // cm, NaN if board not in view
    double heading_error = 0.0;        // rad
    bool ruler_noise_applied = false;
};

struct TrialRecord {
    std::size_t trial_index = 0;
    std::vector<TrialRow> rows;
    std::optional<StopMeasurement> final;
    RlsState calibration;
};

/// Heading from the two wheel readings and the wheelbase, all in one unit.
inline double heading_error_metric(double front, double rear, double wheelbase) {
    if (!(wheelbase > 0.0)) throw ContractViolation("heading_error_metric requires wheelbase > 0");
    return std::atan((rear - front) / wheelbase);
}

inline StopMeasurement measure_stop(const VehicleState& s, const VehicleParams& p, std::optional<double> lidar,
                                    bool ruler_noise, double ruler_half_width, NoiseStream& ruler) {
    const auto wheels = wheel_lateral_errors(s, p);
    StopMeasurement m;
    m.front_lateral_error = 100.0 * wheels.front;
    m.rear_lateral_error = 100.0 * wheels.rear;
    if (ruler_noise) {
        m.front_lateral_error += 100.0 * ruler.uniform(-ruler_half_width, ruler_half_width);
        m.rear_lateral_error += 100.0 * ruler.uniform(-ruler_half_width, ruler_half_width);
        m.ruler_noise_applied = true;
    }
    if (lidar) m.lidar_lateral_error = 100.0 * *lidar;
    m.heading_error = heading_error_metric(m.front_lateral_error, m.rear_lateral_error, 100.0 * p.wheelbase_L);
    return m;
}

/// Run one trial. Per-trial randomness comes only from (scenario.seed,
/// trial_index).
inline TrialRecord run_trial(const Scenario& sc, const GainSchedule& schedule, std::size_t trial_index) {
    sc.validate();
    const VehicleParams& vp = sc.vehicle;
    const OffsetSet& truth = sc.true_offsets;
    const double dt = vp.control_period_dt;
    const double end_time = *sc.speed_profile.stop_time() + sc.stop_hold;

    NoiseStream init(sc.seed, trial_index, StreamPurpose::kInitialCondition);
    NoiseStream ruler(sc.seed, trial_index, StreamPurpose::kRuler);
    SensorStreams streams(sc.seed, trial_index);

    VehicleState s = sc.initial_state;
    s.y += init.uniform(-sc.initial_lateral_jitter, sc.initial_lateral_jitter);
    s.t = 0.0;
    s.front_angle_delta = 0.0;

    std::optional<OnlineCalibrator> calibrator;
    bool frozen = false;
    if (sc.calibration_enabled) {
        calibrator.emplace(vp, sc.calibration);
        if (sc.pre_calibration_run) {
            for (const auto& row : synthesize_weave_telemetry(vp, truth, sc.weave)) calibrator->ingest(row);
            frozen = true;
        }
    }

    LateralController controller(schedule, vp);
    FeedbackSystem feedback(sc.sensors);
    TrialRecord rec;
    rec.trial_index = trial_index;
    rec.rows.reserve(static_cast<std::size_t>(end_time / dt) + 2);

    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        s.t = t;
        s.v = sc.speed_profile.at(t);

        const ImuReading imu = true_imu_reading(s, truth, vp);
        const auto frame = feedback.feedback_frame(s, sc.board, truth, streams, t);
        const ErrorFeedback& used = frame ? *frame : feedback.localization_frame();

        if (calibrator && !frozen) calibrator->ingest(imu, controller.lagged_command());
        const OffsetSet estimate = calibrator ? calibrator->estimate().offsets : OffsetSet{};
        const double cmd = controller.command(used, imu.v2, estimate);

        const Eigen::Vector3d theta = calibrator ? calibrator->state().theta_hat : Eigen::Vector3d::Zero();
        rec.rows.push_back({t, s.x, s.y, s.psi, s.v, s.front_angle_delta + truth.steer_offset_delta_o, cmd,
                            used.lateral_error, used.heading_error, theta[0], theta[1], theta[2]});

        if (t >= end_time - 1e-9) {
            rec.final = measure_stop(s, vp, feedback.lidar_frame(), sc.ruler_noise, sc.ruler_half_width, ruler);
            break;
        }
        VehicleState next = kinematic_step(s, vp, truth);
        next.front_angle_delta = actuator_step(s.front_angle_delta, cmd, vp);
        s = next;
    }
    if (calibrator) rec.calibration = calibrator->state();
    return rec;
}

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // sample std, n - 1 denominator; 0 when n == 1
    std::size_t count = 0;
};

/// Two-pass mean / sample std. Values are sorted first so the result does
/// not depend on trial order. NaNs are skipped.
inline MetricStats two_pass_stats(std::vector<double> values) {
    std::erase_if(values, [](double v) { return std::isnan(v); });
    MetricStats m;
    m.count = values.size();
    if (values.empty()) {
        m.mean = m.std = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return m;
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return m;
}

struct AggregateStats {
    MetricStats front;    // cm
    MetricStats rear;     // cm
    MetricStats lidar;    // cm
    MetricStats heading;  // rad
    std::size_t trial_count = 0;
    bool std_degenerate = false;  // single trial; std reported as 0
};

inline AggregateStats aggregate(const std::vector<TrialRecord>& trials) {
    std::vector<double> front, rear, lidar, heading;
    for (const auto& t : trials) {
        if (!t.final) continue;
        front.push_back(t.final->front_lateral_error);
        rear.push_back(t.final->rear_lateral_error);
        lidar.push_back(t.final->lidar_lateral_error);
        heading.push_back(t.final->heading_error);
    }
    AggregateStats a;
    a.trial_count = front.size();
    a.front = two_pass_stats(std::move(front));
    a.rear = two_pass_stats(std::move(rear));
    a.lidar = two_pass_stats(std::move(lidar));
    a.heading = two_pass_stats(std::move(heading));
    a.std_degenerate = a.trial_count == 1;
    return a;
}

struct MonteCarloResult {
    AggregateStats stats;
    std::vector<TrialRecord> trials;
};

/// Run scenario.trial_count independent trials on up to `jobs` threads.
inline MonteCarloResult run_montecarlo(const Scenario& sc, const GainSchedule& schedule, unsigned jobs = 1) {
    sc.validate();
    const std::size_t n = sc.trial_count;
    MonteCarloResult out;
    out.trials.resize(n);
    std::vector<std::exception_ptr> errors(n);

    auto worker = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            try {
                out.trials[i] = run_trial(sc, schedule, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs == 1) {
        worker(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker, j, jobs);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw Error("trial " + std::to_string(i) + ": " + e.what());
        }
    }
    out.stats = aggregate(out.trials);
    return out;
}

/// One row of a field results table: mean and std per column. Columns the
/// source table marks N/A are nullopt.
struct ReferenceRow {
    std::string name;
    std::optional<MetricStats> longitudinal;  // cm
    MetricStats front;                        // cm
    MetricStats rear;                         // cm
    std::optional<MetricStats> lidar;         // cm
    MetricStats heading;                      // rad
    std::size_t trials = 0;
};

/// Field results, kept as constants for side-by-side reports. They are not
/// reproduced by this simulation.
inline std::vector<ReferenceRow> field_reference_tables() {
    return {
        {"proposed_control_module", MetricStats{0.2, 10.1, 40}, {-0.7, 0.7, 40}, {1.7, 0.9, 40},
         MetricStats{0.3, 0.9, 40}, {0.0061, 0.0013, 40}, 40},
        {"human_drivers", std::nullopt, {-0.5, 4.2, 30}, {-0.3, 4.0, 30}, std::nullopt, {0.0005, 0.0005, 30}, 30},
        {"original_control_module", std::nullopt, {-3.7, 3.1, 15}, {-4.0, 3.9, 15}, std::nullopt,
         {-0.0007, 0.0072, 15}, 15},
    };
}

/// Precision gate for the proposed mode.
struct PrecisionGate {
    double max_abs_rear_mean_cm = 2.0;
    double max_rear_three_sigma_cm = 5.0;
    double max_heading_std_rad = 0.005;

    struct Result {
        bool rear_mean_ok = false;
        bool rear_three_sigma_ok = false;
        bool heading_std_ok = false;
        bool passed() const { return rear_mean_ok && rear_three_sigma_ok && heading_std_ok; }
    };

    Result evaluate(const AggregateStats& s) const {
        return {std::abs(s.rear.mean) <= max_abs_rear_mean_cm, 3.0 * s.rear.std <= max_rear_three_sigma_cm,
                s.heading.std <= max_heading_std_rad};
    }
};

struct ComparisonReport {
    AggregateStats proposed;
    AggregateStats degraded;
    std::vector<ReferenceRow> references;
    double rear_std_ratio = 0.0;  // degraded / proposed
    PrecisionGate gate;
    PrecisionGate::Result proposed_gate;
};

inline ComparisonReport compare_modes(const AggregateStats& proposed, const AggregateStats& degraded,
                                      std::vector<ReferenceRow> references, PrecisionGate gate = {}) {
    ComparisonReport r;
    r.proposed = proposed;
    r.degraded = degraded;
    r.references = std::move(references);
    r.rear_std_ratio = proposed.rear.std > 0.0 ? degraded.rear.std / proposed.rear.std
                                               : std::numeric_limits<double>::infinity();
    r.gate = gate;
    r.proposed_gate = gate.evaluate(proposed);
    return r;
}

}  // namespace latpark

#endif  // LATPARK_HARNESS_HPP
