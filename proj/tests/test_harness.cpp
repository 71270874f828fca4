#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "latpark/harness.hpp"

using namespace latpark;

namespace {

const GainSchedule& schedule() {
    static const GainSchedule s = GainSchedule::design(VehicleParams{}, LqrConfig{});
    return s;
}

Scenario quiet_scenario() {
    Scenario sc;
    sc.true_offsets = {};
    sc.sensors.lidar_noise_std = 0.0;
    sc.sensors.heading_noise_std = 0.0;
    sc.sensors.degraded_lateral_noise_std = 0.0;
    sc.sensors.lidar_delay = 0.0;
    sc.sensors.heading_delay = 0.0;
    sc.sensors.degraded_lateral_delay = 0.0;
    sc.initial_state.y = 0.0;
    sc.initial_state.psi = 0.0;
    sc.initial_lateral_jitter = 0.0;
    sc.calibration_enabled = false;
    return sc;
}

}  // namespace

TEST(HeadingErrorMetric, Examples) {
    EXPECT_EQ(heading_error_metric(1.3, 1.3, 393.0), 0.0);
    EXPECT_NEAR(heading_error_metric(-0.7, 1.7, 393.0), 0.0061, 0.0002);
    EXPECT_DOUBLE_EQ(heading_error_metric(0.0, 3.93, 3.93), kPi / 4);
    EXPECT_THROW(heading_error_metric(0, 0, 0), ContractViolation);
}

TEST(SpeedProfile, InterpolationAndStop) {
    SpeedProfile p({{0, 2}, {10, 2}, {14, 0}});
    EXPECT_EQ(p.at(-1), 2.0);
    EXPECT_EQ(p.at(5), 2.0);
    EXPECT_DOUBLE_EQ(p.at(12), 1.0);
    EXPECT_EQ(p.at(100), 0.0);
    ASSERT_TRUE(p.stop_time());
    EXPECT_EQ(*p.stop_time(), 14.0);
    EXPECT_FALSE(SpeedProfile({{0, 2}, {10, 1}}).stop_time());
    EXPECT_THROW(SpeedProfile({{0, 2}, {0, 1}}).validate(), ContractViolation);
    EXPECT_THROW(SpeedProfile({{0, -1}}).validate(), ContractViolation);
}

TEST(RunTrial, NothingToCorrect) {
    const auto rec = run_trial(quiet_scenario(), schedule(), 0);
    ASSERT_TRUE(rec.final);
    EXPECT_LE(std::abs(rec.final->front_lateral_error), 0.1);
    EXPECT_LE(std::abs(rec.final->rear_lateral_error), 0.1);
}

TEST(RunTrial, NeverStoppingProfileRejected) {
    auto sc = quiet_scenario();
    sc.speed_profile = SpeedProfile({{0, 2.0}, {5, 1.0}});
    EXPECT_THROW(run_trial(sc, schedule(), 0), ContractViolation);
}

TEST(RunTrial, RowsIncreaseAndEndStopped) {
    const auto rec = run_trial(Scenario{}, schedule(), 3);
    ASSERT_TRUE(rec.final);
    ASSERT_GT(rec.rows.size(), 100u);
    for (std::size_t i = 1; i < rec.rows.size(); ++i) ASSERT_GT(rec.rows[i].t, rec.rows[i - 1].t);
    EXPECT_EQ(rec.rows.back().v, 0.0);
    EXPECT_EQ(rec.trial_index, 3u);
}

TEST(RunTrial, StopMeasurementMatchesMetric) {
    for (std::size_t i = 0; i < 5; ++i) {
        const auto rec = run_trial(Scenario{}, schedule(), i);
        const auto& m = *rec.final;
        EXPECT_FALSE(m.ruler_noise_applied);
        EXPECT_NEAR(m.heading_error,
                    heading_error_metric(m.front_lateral_error, m.rear_lateral_error, 100.0 * 3.93), 1e-9);
        const auto& last = rec.rows.back();
        EXPECT_NEAR(m.rear_lateral_error, 100.0 * last.y, 1e-12);
        EXPECT_FALSE(std::isnan(m.lidar_lateral_error));
    }
}

TEST(RunTrial, Deterministic) {
    const auto a = run_trial(Scenario{}, schedule(), 7);
    const auto b = run_trial(Scenario{}, schedule(), 7);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    EXPECT_TRUE(a.rows == b.rows);
    auto other = Scenario{};
    other.seed = 2;
    EXPECT_FALSE(run_trial(other, schedule(), 7).rows == a.rows);
}

TEST(RunTrial, RulerNoiseBounded) {
    auto sc = Scenario{};
    sc.ruler_noise = true;
    const auto clean = run_trial(Scenario{}, schedule(), 1);
    const auto noisy = run_trial(sc, schedule(), 1);
    EXPECT_TRUE(noisy.final->ruler_noise_applied);
    EXPECT_LE(std::abs(noisy.final->rear_lateral_error - clean.final->rear_lateral_error), 1.0);
    EXPECT_LE(std::abs(noisy.final->front_lateral_error - clean.final->front_lateral_error), 1.0);
    EXPECT_NE(noisy.final->rear_lateral_error, clean.final->rear_lateral_error);
}

TEST(RunTrial, CalibrationStateRecorded) {
    const auto rec = run_trial(Scenario{}, schedule(), 0);
    EXPECT_EQ(rec.calibration.sample_count, 2000u);
    EXPECT_NEAR(rec.calibration.theta_hat[1], 0.3, 1e-3);
    EXPECT_EQ(rec.rows.back().theta1, rec.calibration.theta_hat[1]);
}

TEST(TwoPassStats, KnownValues) {
    const auto m = two_pass_stats({2, 4, 4, 4, 5, 5, 7, 9});
    EXPECT_DOUBLE_EQ(m.mean, 5.0);
    EXPECT_NEAR(m.std, std::sqrt(32.0 / 7.0), 1e-15);
    EXPECT_EQ(m.count, 8u);
}

TEST(TwoPassStats, OrderIndependentAndLargeOffset) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(1e8, 1.0);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = n(rng);
    const auto a = two_pass_stats(xs);
    std::shuffle(xs.begin(), xs.end(), rng);
    const auto b = two_pass_stats(xs);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std, b.std);
    EXPECT_NEAR(a.std, 1.0, 0.1);
}

TEST(TwoPassStats, DegenerateCases) {
    const auto one = two_pass_stats({3.0});
    EXPECT_EQ(one.mean, 3.0);
    EXPECT_EQ(one.std, 0.0);
    const auto none = two_pass_stats({std::nan("")});
    EXPECT_EQ(none.count, 0u);
    EXPECT_TRUE(std::isnan(none.mean));
}

TEST(RunMontecarlo, SingleTrialFlagged) {
    auto sc = Scenario{};
    sc.trial_count = 1;
    const auto mc = run_montecarlo(sc, schedule());
    EXPECT_EQ(mc.stats.trial_count, 1u);
    EXPECT_TRUE(mc.stats.std_degenerate);
    EXPECT_EQ(mc.stats.rear.std, 0.0);
}

TEST(RunMontecarlo, ThreadsMatchSerial) {
    auto sc = Scenario{};
    sc.trial_count = 9;
    const auto serial = run_montecarlo(sc, schedule(), 1);
    const auto threaded = run_montecarlo(sc, schedule(), 4);
    ASSERT_EQ(serial.trials.size(), threaded.trials.size());
    for (std::size_t i = 0; i < serial.trials.size(); ++i) {
        EXPECT_EQ(threaded.trials[i].trial_index, i);
        EXPECT_TRUE(serial.trials[i].rows == threaded.trials[i].rows);
    }
    EXPECT_EQ(serial.stats.rear.mean, threaded.stats.rear.mean);
    EXPECT_EQ(serial.stats.rear.std, threaded.stats.rear.std);
}

TEST(RunMontecarlo, AggregateIgnoresTrialOrder) {
    auto sc = Scenario{};
    sc.trial_count = 12;
    auto mc = run_montecarlo(sc, schedule());
    auto trials = mc.trials;
    std::reverse(trials.begin(), trials.end());
    const auto again = aggregate(trials);
    EXPECT_EQ(again.front.mean, mc.stats.front.mean);
    EXPECT_EQ(again.heading.std, mc.stats.heading.std);
}

TEST(RunMontecarlo, RearSpreadGrowsWithLateralNoise) {
    double previous = -1.0;
    for (double cm : {0.42, 1.0, 2.0, 4.0}) {
        auto sc = Scenario{};
        sc.trial_count = 40;
        sc.sensors.lidar_noise_std = cm / 100.0;
        const auto mc = run_montecarlo(sc, schedule(), 4);
        EXPECT_GE(mc.stats.rear.std, previous) << "lidar noise " << cm << " cm";
        previous = mc.stats.rear.std;
    }
}

TEST(CompareModes, ReferenceConstantsAndRatio) {
    const auto refs = field_reference_tables();
    ASSERT_EQ(refs.size(), 3u);
    EXPECT_EQ(refs[1].rear.mean, -0.3);
    EXPECT_EQ(refs[1].rear.std, 4.0);
    EXPECT_EQ(refs[2].rear.mean, -4.0);
    EXPECT_EQ(refs[2].rear.std, 3.9);
    EXPECT_EQ(refs[0].rear.std, 0.9);
    EXPECT_EQ(refs[0].heading.mean, 0.0061);
    EXPECT_EQ(refs[0].trials, 40u);

    AggregateStats p, d;
    p.rear = {0.5, 1.0, 40};
    p.heading = {0.0, 0.001, 40};
    d.rear = {1.0, 3.5, 40};
    const auto r = compare_modes(p, d, refs);
    EXPECT_DOUBLE_EQ(r.rear_std_ratio, 3.5);
    EXPECT_TRUE(r.proposed_gate.passed());
    p.rear.std = 2.0;  // 3 sigma = 6 cm
    EXPECT_FALSE(compare_modes(p, d, refs).proposed_gate.rear_three_sigma_ok);
}

TEST(Scenario, DegradedPreset) {
    const auto sc = degraded_scenario();
    EXPECT_EQ(sc.sensors.lateral_feedback_mode, LateralFeedbackMode::kDegradedLocalization);
    EXPECT_FALSE(sc.calibration_enabled);
    EXPECT_NO_THROW(sc.validate());
}
