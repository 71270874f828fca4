#ifndef LATPARK_CALIBRATION_HPP
#define LATPARK_CALIBRATION_HPP

// Online recursive least squares for steering-wheel offset and IMU mounting
// offsets. The two observation rows are
//
//   L w / v1 - tan(delta)  = (1 + L w / v1) * tan(delta_o)
//   atan(vy' / vx')        = (w / v2) * x_offset + h_o
//
// with theta = [tan(delta_o), x_offset, h_o]. y_offset is not observable in
// this linear form and is taken from configuration.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "latpark/error.hpp"
#include "latpark/plant.hpp"

namespace latpark {

struct ExcitationGate {
    double min_speed = 1.0;                                        // m/s, on v2
    double max_yaw_rate = std::numeric_limits<double>::infinity();  // rad/s

    bool admits(const ImuReading& imu) const {
        return imu.v2 >= min_speed && std::abs(imu.omega) <= max_yaw_rate;
    }

    void validate() const {
        if (!(min_speed > 0.0)) throw ContractViolation("calibration min_speed must be > 0");
        if (!(max_yaw_rate > 0.0)) throw ContractViolation("calibration max_yaw_rate must be > 0");
    }
};

struct CalibrationConfig {
    ExcitationGate gate;
    double y_offset_assumed = 0.2;      // m, from the mounting drawing
    double initial_covariance = 1e6;    // P(0) = initial_covariance * I
    double forgetting_factor = 1.0;     // lambda; 1 = no forgetting
    std::size_t min_samples = 50;       // below this the estimate is not used

    void validate() const {
        gate.validate();
        if (!(initial_covariance > 0.0)) throw ContractViolation("initial_covariance must be > 0");
        if (!(forgetting_factor > 0.9 && forgetting_factor <= 1.0))
            throw ContractViolation("forgetting_factor must lie in (0.9, 1]");
        if (!(std::abs(y_offset_assumed) <= OffsetSet::kMaxLever))
            throw ContractViolation("|y_offset_assumed| must be <= 2 m");
    }
};

using Regressor = Eigen::Matrix<double, 2, 3>;

struct RegressorSample {
    Eigen::Vector2d y = Eigen::Vector2d::Zero();
    Regressor phi = Regressor::Zero();
};

struct RlsState {
    Eigen::Vector3d theta_hat = Eigen::Vector3d::Zero();
    Eigen::Matrix3d P = Eigen::Matrix3d::Identity() * 1e6;
    std::size_t sample_count = 0;

    static RlsState initial(double p0 = 1e6) {
        RlsState s;
        s.P = Eigen::Matrix3d::Identity() * p0;
        return s;
    }
};

/// Rear-axle speed from the IMU speed, undoing the lever-arm and yaw
/// misalignment terms.
inline double estimate_v1(const ImuReading& imu, double h_o_assumed, double y_offset_assumed = 0.2) {
    if (!(imu.v2 > 0.0)) throw ContractViolation("estimate_v1 requires v2 > 0");
    return imu.v2 * std::cos(imu.direction() - h_o_assumed) - imu.omega * y_offset_assumed;
}

/// delta_commanded is the front-wheel angle the vehicle believes it holds,
/// i.e. the command after the actuator lag, without the unknown offset.
/// Returns nullopt when the gate rejects the sample.
inline std::optional<RegressorSample> build_regressor(const ImuReading& imu, double delta_commanded, double v1,
                                                      const VehicleParams& params,
                                                      const ExcitationGate& gate = {}) {
    if (!gate.admits(imu)) return std::nullopt;
    if (!(v1 > 0.0)) throw ContractViolation("build_regressor: v1 must be > 0 for a gated-in sample");
    const double curvature_term = params.wheelbase_L * imu.omega / v1;
    RegressorSample s;
    s.y << curvature_term - std::tan(delta_commanded), imu.direction();
    s.phi << 1.0 + curvature_term, 0.0, 0.0,
             0.0, imu.omega / imu.v2, 1.0;
    return s;
}

enum class RlsStatus { kApplied, kSkippedSingular };

struct RlsResult {
    RlsState state;
    RlsStatus status = RlsStatus::kApplied;
};

/// Block update with the two-row regressor:
///   gain  = P phi^T (lambda I + phi P phi^T)^-1
///   theta = theta + gain (y - phi theta)
///   P     = (I - gain phi) P / lambda, symmetrized.
inline RlsResult rls_update(const RlsState& state, const RegressorSample& sample, double lambda = 1.0) {
    const Eigen::Matrix<double, 3, 2> PphiT = state.P * sample.phi.transpose();
    const Eigen::Matrix2d innovation = lambda * Eigen::Matrix2d::Identity() + sample.phi * PphiT;
    const Eigen::LLT<Eigen::Matrix2d> llt(innovation);
    if (!innovation.allFinite() || llt.info() != Eigen::Success) return {state, RlsStatus::kSkippedSingular};

    const Eigen::Matrix<double, 3, 2> gain = llt.solve(PphiT.transpose()).transpose();
    RlsState next;
    next.theta_hat = state.theta_hat + gain * (sample.y - sample.phi * state.theta_hat);
    const Eigen::Matrix3d P = (Eigen::Matrix3d::Identity() - gain * sample.phi) * state.P / lambda;
    next.P = 0.5 * (P + P.transpose());
    next.sample_count = state.sample_count + 1;
    if (!next.theta_hat.allFinite() || !next.P.allFinite()) return {state, RlsStatus::kSkippedSingular};
    return {next, RlsStatus::kApplied};
}

struct OffsetEstimate {
    OffsetSet offsets;
    bool low_confidence = true;
};

inline OffsetEstimate current_offsets(const RlsState& state, const CalibrationConfig& cfg = {}) {
    OffsetEstimate e;
    e.offsets.imu_y_offset = cfg.y_offset_assumed;
    if (state.sample_count < cfg.min_samples) {
        e.offsets = {};
        return e;
    }
    e.offsets.steer_offset_delta_o = std::atan(state.theta_hat[0]);
    e.offsets.imu_x_offset = state.theta_hat[1];
    e.offsets.imu_heading_offset_h_o = state.theta_hat[2];
    e.low_confidence = false;
    return e;
}

/// One row of calibration telemetry, as logged by the vehicle.
struct TelemetrySample {
    double t = 0.0;
    double v2 = 0.0;
    double omega = 0.0;
    double vx_body = 0.0;
    double vy_body = 0.0;
    double delta_commanded = 0.0;

    ImuReading imu() const { return {v2, omega, vx_body, vy_body}; }
};

enum class IngestResult { kApplied, kGated, kSkippedSingular };

/// Gating, v1 reconstruction and RLS wired together. h_o inside the v1
/// reconstruction uses the current estimate.
class OnlineCalibrator {
public:
    OnlineCalibrator(VehicleParams params, CalibrationConfig cfg)
        : params_(params), cfg_(cfg), state_(RlsState::initial(cfg.initial_covariance)) {
        cfg_.validate();
    }

    IngestResult ingest(const ImuReading& imu, double delta_commanded) {
        if (!cfg_.gate.admits(imu)) {
            ++gated_;
            return IngestResult::kGated;
        }
        const double v1 = estimate_v1(imu, state_.theta_hat[2], cfg_.y_offset_assumed);
        const auto sample = build_regressor(imu, delta_commanded, v1, params_, cfg_.gate);
        const auto result = rls_update(state_, *sample, cfg_.forgetting_factor);
        if (result.status == RlsStatus::kSkippedSingular) {
            ++skipped_;
            return IngestResult::kSkippedSingular;
        }
        state_ = result.state;
        return IngestResult::kApplied;
    }

    IngestResult ingest(const TelemetrySample& row) { return ingest(row.imu(), row.delta_commanded); }

    const RlsState& state() const { return state_; }
    OffsetEstimate estimate() const { return current_offsets(state_, cfg_); }
    std::size_t gated_count() const { return gated_; }
    std::size_t skipped_count() const { return skipped_; }

private:
    VehicleParams params_;
    CalibrationConfig cfg_;
    RlsState state_;
    std::size_t gated_ = 0;
    std::size_t skipped_ = 0;
};

}  // namespace latpark

#endif  // LATPARK_CALIBRATION_HPP
