#ifndef LATPARK_PLANT_HPP
#define LATPARK_PLANT_HPP

// Ground-truth vehicle: forward-Euler kinematic bicycle, first-order steering
// lag, and the physical imperfections (steering bias, askew IMU) the
// calibration module has to remove.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "latpark/error.hpp"

namespace latpark {

inline constexpr double kPi = std::numbers::pi;

/// Wrap an angle to (-pi, pi].
inline double normalize_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

struct VehicleParams {
    double wheelbase_L = 3.93;            // m
    double tau = 0.1668;                  // steering lag time constant, s
    double max_front_angle = 0.52;        // rad
    double max_front_angle_rate = 0.4;    // rad/s
    double control_period_dt = 0.01;      // s

    void validate() const {
        if (!(wheelbase_L > 0.0)) throw ContractViolation("wheelbase_L must be > 0");
        if (!(tau > 0.0)) throw ContractViolation("tau must be > 0");
        if (!(control_period_dt > 0.0)) throw ContractViolation("control_period_dt must be > 0");
        if (!(max_front_angle > 0.0 && max_front_angle < kPi / 2))
            throw ContractViolation("max_front_angle must lie in (0, pi/2)");
        if (!(max_front_angle_rate > 0.0)) throw ContractViolation("max_front_angle_rate must be > 0");
    }
};

/// Physical offsets of a real vehicle. In the plant these are the injected
/// truth; in the controller they are the calibrated estimate.
struct OffsetSet {
    double steer_offset_delta_o = 0.0;    // rad, actual = commanded + offset
    double imu_heading_offset_h_o = 0.0;  // rad
    double imu_x_offset = 0.0;            // m, longitudinal lever arm
    double imu_y_offset = 0.0;            // m, lateral lever arm

    static constexpr double kMaxAngle = 0.1;
    static constexpr double kMaxLever = 2.0;

    void validate() const {
        if (!(std::abs(steer_offset_delta_o) <= kMaxAngle))
            throw ContractViolation("|steer_offset_delta_o| must be <= 0.1 rad");
        if (!(std::abs(imu_heading_offset_h_o) <= kMaxAngle))
            throw ContractViolation("|imu_heading_offset_h_o| must be <= 0.1 rad");
        if (!(std::abs(imu_x_offset) <= kMaxLever)) throw ContractViolation("|imu_x_offset| must be <= 2 m");
        if (!(std::abs(imu_y_offset) <= kMaxLever)) throw ContractViolation("|imu_y_offset| must be <= 2 m");
    }

    friend bool operator==(const OffsetSet&, const OffsetSet&) = default;
};

/// Rear-axle pose. front_angle_delta is the lagged actuator output; the wheels
/// actually sit at front_angle_delta + steer_offset_delta_o.
struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0;
    double v = 0.0;
    double front_angle_delta = 0.0;
    double t = 0.0;
};

/// What an IMU mounted at (imu_x_offset, imu_y_offset) and yawed by h_o
/// reports. v2 is the speed magnitude at the IMU, not at the rear axle.
struct ImuReading {
    double v2 = 0.0;
    double omega = 0.0;
    double vx_body = 0.0;
    double vy_body = 0.0;

    /// Velocity direction in the IMU frame, atan(vy'/vx').
    double direction() const { return std::atan2(vy_body, vx_body); }
};

/// One forward-Euler step of the kinematic bicycle using the actual front
/// wheel angle (lagged command plus steering bias). Speed and the lagged
/// angle are carried over unchanged; the caller updates them.
inline VehicleState kinematic_step(const VehicleState& s, const VehicleParams& p,
                                   const OffsetSet& truth = {}) {
    const double dt = p.control_period_dt;
    const double delta = s.front_angle_delta + truth.steer_offset_delta_o;
    VehicleState n = s;
    n.x = s.x + s.v * std::cos(s.psi) * dt;
    n.y = s.y + s.v * std::sin(s.psi) * dt;
    n.psi = normalize_angle(s.psi + s.v * std::tan(delta) / p.wheelbase_L * dt);
    n.t = s.t + dt;
    return n;
}

/// Exact zero-order-hold step of G(s) = 1/(tau s + 1), then rate and angle
/// saturation.
inline double actuator_step(double current, double commanded, const VehicleParams& p) {
    const double lim = p.max_front_angle;
    const double cmd = std::clamp(commanded, -lim, lim);
    const double decay = std::exp(-p.control_period_dt / p.tau);
    double next = cmd + (current - cmd) * decay;
    const double max_step = p.max_front_angle_rate * p.control_period_dt;
    next = std::clamp(next, current - max_step, current + max_step);
    return std::clamp(next, -lim, lim);
}

/// Body-frame velocities seen by an askew IMU. The rear axle moves at v with
/// yaw rate omega = v tan(delta_actual) / L; the lever arm adds omega x r and
/// the angular misalignment rotates the result by h_o, so that
///   v2 sin(h - h_o) = omega x_offset,  v1 = v2 cos(h - h_o) - omega y_offset.
inline ImuReading true_imu_reading(const VehicleState& s, const OffsetSet& truth,
                                   const VehicleParams& p) {
    if (!(s.v >= 0.0)) throw ContractViolation("true_imu_reading requires v >= 0");
    if (s.v == 0.0) return {};
    const double delta = s.front_angle_delta + truth.steer_offset_delta_o;
    const double omega = s.v * std::tan(delta) / p.wheelbase_L;
    const double along = s.v + omega * truth.imu_y_offset;
    const double across = omega * truth.imu_x_offset;
    const double v2 = std::hypot(along, across);
    const double h = std::atan2(across, along) + truth.imu_heading_offset_h_o;
    return {v2, omega, v2 * std::cos(h), v2 * std::sin(h)};
}

struct WheelLateralErrors {
    double front = 0.0;  // m
    double rear = 0.0;   // m
};

/// Lateral position of both axles relative to the reference line (the x axis).
inline WheelLateralErrors wheel_lateral_errors(const VehicleState& s, const VehicleParams& p) {
    return {s.y + p.wheelbase_L * std::sin(s.psi), s.y};
}

}  // namespace latpark

#endif  // LATPARK_PLANT_HPP
