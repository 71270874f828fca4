#ifndef LATPARK_CONTROL_HPP
#define LATPARK_CONTROL_HPP

// Discrete LQR on the lateral error state [e_y, e_psi, delta], gain-scheduled
// over speed, with offset compensation on the way in (heading) and out
// (steering).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latpark/calibration.hpp"
#include "latpark/error.hpp"
#include "latpark/plant.hpp"
#include "latpark/sensing.hpp"

namespace latpark {

struct LqrConfig {
    double q_lat = 4.0;
    double q_heading = 1.0;
    double q_delta = 0.0;
    double r_cmd = 10.0;  // tuned against the 160 ms heading delay and rate limit
    double riccati_tol = 1e-9;  // relative to max|P|
    std::size_t riccati_max_iter = 200000;
    std::vector<double> gain_speed_grid{0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 11.1};

    void validate() const {
        if (!(q_lat >= 0.0 && q_heading >= 0.0 && q_delta >= 0.0))
            throw ContractViolation("LQR state weights must be >= 0");
        if (!(r_cmd > 0.0)) throw ContractViolation("r_cmd must be > 0");
        if (!(riccati_tol > 0.0)) throw ContractViolation("riccati_tol must be > 0");
        if (riccati_max_iter == 0) throw ContractViolation("riccati_max_iter must be >= 1");
        if (gain_speed_grid.empty()) throw ContractViolation("gain_speed_grid must not be empty");
        for (std::size_t i = 0; i < gain_speed_grid.size(); ++i) {
            if (!(gain_speed_grid[i] > 0.0)) throw ContractViolation("gain_speed_grid speeds must be > 0");
            if (i > 0 && !(gain_speed_grid[i] > gain_speed_grid[i - 1]))
                throw ContractViolation("gain_speed_grid must be strictly increasing");
        }
    }

    Eigen::Matrix3d Q() const { return Eigen::Vector3d(q_lat, q_heading, q_delta).asDiagonal(); }
};

struct ErrorStateModel {
    Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
    Eigen::Vector3d B = Eigen::Vector3d::Zero();
};

/// Forward-Euler discretization of
///   e_y' = v e_psi,  e_psi' = v delta / L,  delta' = (u - delta) / tau.
inline ErrorStateModel linearize(double v, const VehicleParams& p) {
    if (!(v > 0.0)) throw ContractViolation("linearize requires v > 0");
    const double dt = p.control_period_dt;
    ErrorStateModel m;
    m.A << 1.0, v * dt, 0.0,
           0.0, 1.0, v * dt / p.wheelbase_L,
           0.0, 0.0, 1.0 - dt / p.tau;
    m.B << 0.0, 0.0, dt / p.tau;
    return m;
}

inline double spectral_radius(const Eigen::MatrixXd& M) {
    return Eigen::EigenSolver<Eigen::MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

struct DareSolution {
    Eigen::MatrixXd P;
    Eigen::MatrixXd K;
    std::size_t iterations = 0;
};

/// Fixed-point iteration of the discrete Riccati recursion starting at P = Q,
/// stopped when the max-abs change is at most tol times max|P|. The relative
/// test keeps the result exactly invariant to scaling Q and R together.
inline DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& R, double tol, std::size_t max_iter) {
    Eigen::MatrixXd P = Q;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const Eigen::MatrixXd BtP = B.transpose() * P;
        const Eigen::MatrixXd gain = (R + BtP * B).ldlt().solve(BtP * A);
        Eigen::MatrixXd next = A.transpose() * P * A - A.transpose() * P * B * gain + Q;
        next = 0.5 * (next + next.transpose());
        const double change = (next - P).cwiseAbs().maxCoeff();
        P = std::move(next);
        if (!P.allFinite()) break;
        if (change <= tol * P.cwiseAbs().maxCoeff()) {
            const Eigen::MatrixXd BtPn = B.transpose() * P;
            return {P, (R + BtPn * B).ldlt().solve(BtPn * A), it};
        }
    }
    throw Error("Riccati iteration did not converge within " + std::to_string(max_iter) + " iterations");
}

using GainRow = Eigen::RowVector3d;

/// LQR gains on a speed grid; linear interpolation between grid points and
/// the end gains held outside.
class GainSchedule {
public:
    GainSchedule(std::vector<double> speeds, std::vector<GainRow> gains)
        : speeds_(std::move(speeds)), gains_(std::move(gains)) {
        if (speeds_.empty() || speeds_.size() != gains_.size())
            throw ContractViolation("GainSchedule: speeds and gains must be non-empty and equal length");
    }

    static GainSchedule design(const VehicleParams& params, const LqrConfig& cfg) {
        params.validate();
        cfg.validate();
        std::vector<GainRow> gains;
        gains.reserve(cfg.gain_speed_grid.size());
        const Eigen::MatrixXd R = Eigen::MatrixXd::Constant(1, 1, cfg.r_cmd);
        for (double v : cfg.gain_speed_grid) {
            const auto m = linearize(v, params);
            try {
                const auto sol = solve_dare(m.A, m.B, cfg.Q(), R, cfg.riccati_tol, cfg.riccati_max_iter);
                gains.emplace_back(sol.K.row(0));
            } catch (const Error& e) {
                std::ostringstream os;
                os << "gain design at speed " << v << " m/s: " << e.what();
                throw Error(os.str());
            }
        }
        return GainSchedule(cfg.gain_speed_grid, std::move(gains));
    }

    GainRow gain_at(double v) const {
        if (v <= speeds_.front()) return gains_.front();
        if (v >= speeds_.back()) return gains_.back();
        const auto hi = static_cast<std::size_t>(
            std::upper_bound(speeds_.begin(), speeds_.end(), v) - speeds_.begin());
        const std::size_t lo = hi - 1;
        const double w = (v - speeds_[lo]) / (speeds_[hi] - speeds_[lo]);
        return (1.0 - w) * gains_[lo] + w * gains_[hi];
    }

    const std::vector<double>& speeds() const { return speeds_; }
    const std::vector<GainRow>& gains() const { return gains_; }

private:
    std::vector<double> speeds_;
    std::vector<GainRow> gains_;
};

/// Offset-compensated LQR steering command.
///
/// front_angle_state is the controller's estimate of the actual front-wheel
/// angle. When previous_command is given it bounds the per-period change.
inline double steering_command(const ErrorFeedback& feedback, double v, const GainSchedule& schedule,
                               const OffsetSet& estimate, const VehicleParams& params,
                               double front_angle_state = 0.0,
                               std::optional<double> previous_command = std::nullopt) {
    const Eigen::Vector3d x(feedback.lateral_error, feedback.heading_error - estimate.imu_heading_offset_h_o,
                            front_angle_state);
    const double u = -schedule.gain_at(v).dot(x);
    double cmd = u - estimate.steer_offset_delta_o;
    if (previous_command) {
        const double max_step = params.max_front_angle_rate * params.control_period_dt;
        cmd = std::clamp(cmd, *previous_command - max_step, *previous_command + max_step);
    }
    return std::clamp(cmd, -params.max_front_angle, params.max_front_angle);
}

/// Per-trial controller state: previous command plus a replica of the
/// steering lag, since the vehicle has no front-angle sensor.
class LateralController {
public:
    LateralController(const GainSchedule& schedule, VehicleParams params)
        : schedule_(&schedule), params_(params) {}

    double command(const ErrorFeedback& feedback, double v, const OffsetSet& estimate) {
        const double front = lagged_command_ + estimate.steer_offset_delta_o;
        const double cmd = steering_command(feedback, v, *schedule_, estimate, params_, front, previous_command_);
        apply(cmd);
        return cmd;
    }

    /// Send a command that did not come from the feedback law (open-loop
    /// manoeuvres) so the lag replica stays in sync with the actuator.
    void apply(double cmd) {
        lagged_command_ = actuator_step(lagged_command_, cmd, params_);
        previous_command_ = cmd;
    }

    /// Replica of the actuator output, offset excluded. Read before
    /// command() it is the front angle the plant is holding this period,
    /// which is the delta the calibration regressor wants.
    double lagged_command() const { return lagged_command_; }
    double previous_command() const { return previous_command_; }

private:
    const GainSchedule* schedule_;
    VehicleParams params_;
    double lagged_command_ = 0.0;
    double previous_command_ = 0.0;
};

}  // namespace latpark

#endif  // LATPARK_CONTROL_HPP
