#ifndef LATPARK_SENSING_HPP
#define LATPARK_SENSING_HPP

// Simulated error feedback: a LiDAR rangefinder against a roadside board for
// lateral error, localization heading corrupted by the IMU heading offset,
// and lumped transport delays on each path.

#include <cmath>
#include <deque>
#include <optional>
#include <string>

#include "latpark/error.hpp"
#include "latpark/plant.hpp"
#include "latpark/random.hpp"

namespace latpark {

enum class LateralFeedbackMode { kDirectLidar, kDegradedLocalization };

inline const char* to_string(LateralFeedbackMode m) {
    return m == LateralFeedbackMode::kDirectLidar ? "direct_lidar" : "degraded_localization";
}

inline LateralFeedbackMode lateral_mode_from_string(const std::string& s) {
    if (s == "direct_lidar") return LateralFeedbackMode::kDirectLidar;
    if (s == "degraded_localization") return LateralFeedbackMode::kDegradedLocalization;
    throw ContractViolation("unknown lateral_feedback_mode '" + s + "'");
}

struct SensorConfig {
    double lidar_noise_std = 0.0042;  // m, moving-vehicle residual
    double lidar_rate = 10.0;         // Hz, shared by both lateral paths
    double lidar_delay = 0.06;        // s
    double heading_noise_std = 0.001; // rad
    double heading_delay = 0.16;      // s
    LateralFeedbackMode lateral_feedback_mode = LateralFeedbackMode::kDirectLidar;
    double degraded_lateral_noise_std = 0.04;  // m
    double degraded_lateral_delay = 0.16;      // s

    void validate() const {
        if (!(lidar_noise_std >= 0.0 && heading_noise_std >= 0.0 && degraded_lateral_noise_std >= 0.0))
            throw ContractViolation("noise standard deviations must be >= 0");
        if (!(lidar_delay >= 0.0 && heading_delay >= 0.0 && degraded_lateral_delay >= 0.0))
            throw ContractViolation("delays must be >= 0");
        if (!(lidar_rate > 0.0)) throw ContractViolation("lidar_rate must be > 0");
    }
};

/// Flat board parallel to the reference line, on its right-hand side at
/// y = -lateral_offset_from_line.
struct ReferenceBoard {
    double start_x = 0.0;
    double length = 14.6;
    double lateral_offset_from_line = 1.5;

    bool covers(double x) const { return x >= start_x && x <= start_x + length; }

    void validate() const {
        if (!(length > 0.0)) throw ContractViolation("board length must be > 0");
    }
};

struct ErrorFeedback {
    double lateral_error = 0.0;  // m, + = left of the reference line
    double heading_error = 0.0;  // rad
    double stamp = 0.0;          // time of the physical truth behind lateral_error
    double heading_stamp = 0.0;
};

/// FIFO of time-stamped samples that replays the input `delay` seconds late.
template <class T>
class DelayLine {
public:
    struct Stamped {
        double stamp;
        T value;
    };

    void push(double stamp, T value) {
        if (!samples_.empty() && stamp < samples_.back().stamp)
            throw ContractViolation("DelayLine::push: timestamp " + std::to_string(stamp) +
                                    " precedes " + std::to_string(samples_.back().stamp));
        samples_.push_back({stamp, std::move(value)});
    }

    /// Newest sample with stamp <= now - delay; the oldest one while the
    /// buffer does not yet span the delay. Older samples are dropped.
    const Stamped& pop(double now, double delay) {
        if (samples_.empty()) throw ContractViolation("DelayLine::pop on empty buffer");
        const double cutoff = now - delay + kStampSlack;
        while (samples_.size() > 1 && samples_[1].stamp <= cutoff) samples_.pop_front();
        return samples_.front();
    }

    const Stamped& push_pop(double stamp, T value, double delay) {
        push(stamp, std::move(value));
        return pop(stamp, delay);
    }

    const Stamped& newest() const { return samples_.back(); }

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

private:
    // Absorbs accumulated rounding in t += dt so a 0.1 s delay at 100 Hz is
    // exactly ten samples.
    static constexpr double kStampSlack = 1e-9;
    std::deque<Stamped> samples_;
};

/// Rangefinder reading converted to lane-line lateral error, or nullopt when
/// the rear axle is not alongside the board.
inline std::optional<double> lidar_measure(const VehicleState& s, const ReferenceBoard& board,
                                           const SensorConfig& cfg, NoiseStream& rng) {
    if (!board.covers(s.x)) return std::nullopt;
    const double range = s.y + board.lateral_offset_from_line;
    return range + rng.gaussian(cfg.lidar_noise_std) - board.lateral_offset_from_line;
}

/// Localization heading: truth plus the uncalibrated IMU yaw bias plus noise.
inline double heading_measure(const VehicleState& s, const OffsetSet& truth, const SensorConfig& cfg,
                              NoiseStream& rng) {
    return s.psi + truth.imu_heading_offset_h_o + rng.gaussian(cfg.heading_noise_std);
}

struct SensorStreams {
    NoiseStream lidar;
    NoiseStream localization;
    NoiseStream heading;

    SensorStreams(std::uint64_t seed, std::uint64_t trial)
        : lidar(seed, trial, StreamPurpose::kLidar),
          localization(seed, trial, StreamPurpose::kLocalization),
          heading(seed, trial, StreamPurpose::kHeading) {}
};

/// Per-trial feedback pipeline. Lateral paths sample at lidar_rate and are
/// held between frames; heading is sampled on every call.
class FeedbackSystem {
public:
    explicit FeedbackSystem(SensorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    /// Frame routed per lateral_feedback_mode. In direct_lidar mode this is
    /// nullopt until the (delayed) LiDAR sees the board.
    std::optional<ErrorFeedback> feedback_frame(const VehicleState& truth, const ReferenceBoard& board,
                                                const OffsetSet& offsets, SensorStreams& rng, double now) {
        heading_.push(now, heading_measure(truth, offsets, cfg_, rng.heading));
        if (!next_lateral_sample_ || now + 1e-9 >= *next_lateral_sample_) {
            lidar_.push(now, lidar_measure(truth, board, cfg_, rng.lidar));
            localization_.push(now, truth.y + rng.localization.gaussian(cfg_.degraded_lateral_noise_std));
            next_lateral_sample_ = (next_lateral_sample_ ? *next_lateral_sample_ : now) + 1.0 / cfg_.lidar_rate;
        }
        const auto& heading = heading_.pop(now, cfg_.heading_delay);
        const auto& loc = localization_.pop(now, cfg_.degraded_lateral_delay);
        localization_frame_ = {loc.value, heading.value, loc.stamp, heading.stamp};

        const auto& lidar = lidar_.pop(now, cfg_.lidar_delay);
        lidar_frame_ = lidar.value;

        if (cfg_.lateral_feedback_mode == LateralFeedbackMode::kDegradedLocalization)
            return localization_frame_;
        if (!lidar.value) return std::nullopt;
        return ErrorFeedback{*lidar.value, heading.value, lidar.stamp, heading.stamp};
    }

    /// Localization-path frame from the latest call; what the vehicle drives
    /// on before the LiDAR picks up the board.
    const ErrorFeedback& localization_frame() const { return localization_frame_; }

    /// Delayed LiDAR lateral error from the latest call, in either mode.
    std::optional<double> lidar_frame() const { return lidar_frame_; }

    const SensorConfig& config() const { return cfg_; }

private:
    SensorConfig cfg_;
    DelayLine<double> heading_;
    DelayLine<double> localization_;
    DelayLine<std::optional<double>> lidar_;
    std::optional<double> next_lateral_sample_;
    ErrorFeedback localization_frame_;
    std::optional<double> lidar_frame_;
};

}  // namespace latpark

#endif  // LATPARK_SENSING_HPP
