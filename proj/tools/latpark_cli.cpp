// latpark: command-line front end for the bus-stop lateral precision
// simulator.
//
//   latpark simulate   --config cfg.json [--set k=v ...]
//   latpark montecarlo --config cfg.json [--trials N] [--seed S] [--jobs J]
//   latpark calibrate  (telemetry.csv | --synthetic) [--config cfg.json]
//   latpark compare    --config cfg.json
//
// Exit codes: 0 success, 1 usage or configuration error, 2 precision gate
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "latpark/calibration.hpp"
#include "latpark/config.hpp"
#include "latpark/control.hpp"
#include "latpark/error.hpp"
#include "latpark/harness.hpp"
#include "latpark/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace latpark;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitGate = 2;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    unsigned jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
    auto* c = cmd->add_option("--config", o.config_path, "JSON run configuration");
    if (config_required) c->required();
    cmd->add_option("--set", o.overrides, "Override a setting, e.g. --set sensors.lidar_noise_std=0");
    cmd->add_option("--seed", o.seed, "Base random seed");
    cmd->add_option("--out-dir", o.out_dir, "Directory for CSV and JSON output");
    cmd->add_option("--jobs", o.jobs, "Trials to run concurrently")->check(CLI::PositiveNumber);
}

/// Load the config with flags folded in as overrides, so the echoed
/// document shows the values actually used.
RunConfig resolve_config(const CommonOptions& o, std::vector<std::string> extra = {}) {
    auto overrides = o.overrides;
    if (o.seed) overrides.push_back("scenario.seed=" + std::to_string(*o.seed));
    if (o.out_dir) overrides.push_back("output_dir=" + json(*o.out_dir).dump());
    for (auto& e : extra) overrides.push_back(std::move(e));
    if (o.config_path.empty()) {
        json doc = to_json(RunConfig{});
        for (const auto& ov : overrides) apply_override(doc, ov);
        return config_from_json(doc);
    }
    return load_config(o.config_path, overrides);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_trials(const fs::path& dir, const std::vector<TrialRecord>& trials) {
    for (const auto& t : trials) {
        std::ostringstream os;
        write_trial_csv(os, t);
        write_file_atomic(dir / trial_csv_name(t.trial_index), os.str());
    }
}

json summary_document(const RunConfig& cfg, const GainSchedule& schedule, const MonteCarloResult& mc) {
    json trials = json::array();
    for (const auto& t : mc.trials) {
        trials.push_back({{"trial_index", t.trial_index},
                          {"csv", trial_csv_name(t.trial_index)},
                          {"stop", t.final ? to_json(*t.final) : json(nullptr)},
                          {"calibration", cfg.scenario.calibration_enabled
                                              ? to_json(t.calibration, cfg.scenario.calibration)
                                              : json(nullptr)}});
    }
    return {{"config", to_json(cfg)},
            {"statistics_convention", "two-pass mean and sample standard deviation (n - 1 denominator)"},
            {"stats", to_json(mc.stats)},
            {"gain_schedule", to_json(schedule)},
            {"trials", trials},
            {"references", reference_tables_json(field_reference_tables())}};
}

void print_stop(const StopMeasurement& m) {
    std::printf("front wheel lateral error: %8.3f cm\n", m.front_lateral_error);
    std::printf("rear wheel lateral error:  %8.3f cm\n", m.rear_lateral_error);
    std::printf("lidar lateral error:       %8.3f cm\n", m.lidar_lateral_error);
    std::printf("heading error:             %8.5f rad\n", m.heading_error);
}

void print_stats(const char* label, const AggregateStats& s) {
    std::printf("%-10s n=%-3zu front %7.3f +- %6.3f cm | rear %7.3f +- %6.3f cm | lidar %7.3f +- %6.3f cm | "
                "heading %8.5f +- %7.5f rad\n",
                label, s.trial_count, s.front.mean, s.front.std, s.rear.mean, s.rear.std, s.lidar.mean, s.lidar.std,
                s.heading.mean, s.heading.std);
}

int cmd_simulate(const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const auto schedule = GainSchedule::design(cfg.scenario.vehicle, cfg.lqr);
    MonteCarloResult mc;
    mc.trials.push_back(run_trial(cfg.scenario, schedule, 0));
    mc.stats = aggregate(mc.trials);
    const fs::path dir = cfg.output_dir;
    write_trials(dir, mc.trials);
    write_file_atomic(dir / "summary.json", dump(summary_document(cfg, schedule, mc)));
    print_stop(*mc.trials.front().final);
    std::printf("wrote %s and summary.json to %s\n", trial_csv_name(0).c_str(), dir.string().c_str());
    return kExitOk;
}

int cmd_montecarlo(const CommonOptions& o, std::optional<long long> trials) {
    std::vector<std::string> extra;
    if (trials) {
        if (*trials < 1) throw ConfigError("--trials", "must be >= 1");
        extra.push_back("scenario.trial_count=" + std::to_string(*trials));
    }
    const RunConfig cfg = resolve_config(o, extra);
    const auto schedule = GainSchedule::design(cfg.scenario.vehicle, cfg.lqr);
    const auto mc = run_montecarlo(cfg.scenario, schedule, o.jobs);
    const fs::path dir = cfg.output_dir;
    write_trials(dir, mc.trials);
    write_file_atomic(dir / "summary.json", dump(summary_document(cfg, schedule, mc)));
    print_stats("montecarlo", mc.stats);
    if (mc.stats.std_degenerate) std::printf("note: single trial, std reported as 0\n");
    std::printf("wrote %zu trial CSVs and summary.json to %s\n", mc.trials.size(), dir.string().c_str());
    return kExitOk;
}

int cmd_calibrate(const CommonOptions& o, const std::string& telemetry_path, bool synthetic) {
    if (synthetic == !telemetry_path.empty())
        throw ConfigError("", "calibrate needs exactly one of a telemetry CSV path or --synthetic");
    const RunConfig cfg = resolve_config(o);
    const Scenario& sc = cfg.scenario;

    std::vector<TelemetrySample> rows;
    if (synthetic) {
        rows = synthesize_weave_telemetry(sc.vehicle, sc.true_offsets, sc.weave);
    } else {
        std::ifstream in(telemetry_path);
        if (!in) throw Error("cannot open telemetry file '" + telemetry_path + "'");
        rows = read_telemetry_csv(in).rows;
    }

    OnlineCalibrator calibrator(sc.vehicle, sc.calibration);
    json trace = json::array();
    for (const auto& row : rows) {
        const auto status = calibrator.ingest(row);
        const auto& th = calibrator.state().theta_hat;
        trace.push_back({row.t, th[0], th[1], th[2],
                         status == IngestResult::kApplied ? "applied"
                         : status == IngestResult::kGated ? "gated"
                                                          : "skipped"});
    }

    json report = {{"source", synthetic ? "synthetic_weave" : telemetry_path},
                   {"rows", rows.size()},
                   {"applied", calibrator.state().sample_count},
                   {"gated_out", calibrator.gated_count()},
                   {"skipped_singular", calibrator.skipped_count()},
                   {"final", to_json(calibrator.state(), sc.calibration)},
                   {"trace_columns", {"t", "theta0", "theta1", "theta2", "status"}},
                   {"trace", trace}};
    if (synthetic) {
        const auto& th = calibrator.state().theta_hat;
        const auto& tr = sc.true_offsets;
        report["injected"] = {{"theta", {std::tan(tr.steer_offset_delta_o), tr.imu_x_offset, tr.imu_heading_offset_h_o}},
                              {"steer_offset_delta_o", tr.steer_offset_delta_o},
                              {"imu_x_offset", tr.imu_x_offset},
                              {"imu_heading_offset_h_o", tr.imu_heading_offset_h_o}};
        report["abs_error"] = {{"steer_offset_delta_o", std::abs(std::atan(th[0]) - tr.steer_offset_delta_o)},
                               {"imu_x_offset", std::abs(th[1] - tr.imu_x_offset)},
                               {"imu_heading_offset_h_o", std::abs(th[2] - tr.imu_heading_offset_h_o)}};
    }
    const fs::path out = fs::path(cfg.output_dir) / "calibration.json";
    write_file_atomic(out, dump(report));

    const auto est = calibrator.estimate();
    std::printf("rows %zu, applied %zu, gated out %zu, skipped %zu\n", rows.size(), calibrator.state().sample_count,
                calibrator.gated_count(), calibrator.skipped_count());
    std::printf("steer offset %.6f rad, imu x offset %.6f m, imu heading offset %.6f rad%s\n",
                est.offsets.steer_offset_delta_o, est.offsets.imu_x_offset, est.offsets.imu_heading_offset_h_o,
                est.low_confidence ? " (low confidence)" : "");
    std::printf("wrote %s\n", out.string().c_str());
    return kExitOk;
}

int cmd_compare(const CommonOptions& o) {
    const RunConfig cfg = resolve_config(o);
    const auto schedule = GainSchedule::design(cfg.scenario.vehicle, cfg.lqr);

    Scenario proposed = cfg.scenario;
    proposed.sensors.lateral_feedback_mode = LateralFeedbackMode::kDirectLidar;
    Scenario degraded = cfg.scenario;
    degraded.sensors.lateral_feedback_mode = LateralFeedbackMode::kDegradedLocalization;
    degraded.calibration_enabled = false;
    degraded.pre_calibration_run = false;

    const auto p = run_montecarlo(proposed, schedule, o.jobs);
    const auto d = run_montecarlo(degraded, schedule, o.jobs);
    const auto report = compare_modes(p.stats, d.stats, field_reference_tables());

    json doc = to_json(report);
    doc["config"] = to_json(cfg);
    doc["gain_schedule"] = to_json(schedule);
    const fs::path out = fs::path(cfg.output_dir) / "compare.json";
    write_file_atomic(out, dump(doc));

    print_stats("proposed", p.stats);
    print_stats("degraded", d.stats);
    std::printf("field reference tables (real vehicle, not reproduced here):\n");
    for (const auto& r : report.references)
        std::printf("  %-24s front %5.1f +- %4.1f cm | rear %5.1f +- %4.1f cm | heading %7.4f +- %6.4f rad\n",
                    r.name.c_str(), r.front.mean, r.front.std, r.rear.mean, r.rear.std, r.heading.mean,
                    r.heading.std);
    std::printf("degraded / proposed rear std: %.2f\n", report.rear_std_ratio);
    std::printf("proposed rear 3-sigma %.3f cm (target <= %.1f cm): %s\n", 3.0 * p.stats.rear.std,
                report.gate.max_rear_three_sigma_cm, report.proposed_gate.rear_three_sigma_ok ? "PASS" : "FAIL");
    std::printf("proposed precision gate: %s\n", report.proposed_gate.passed() ? "PASS" : "FAIL");
    std::printf("wrote %s\n", out.string().c_str());
    return report.proposed_gate.passed() ? kExitOk : kExitGate;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lateral precision parking simulator and calibration toolkit"};
    app.require_subcommand(1);

    CommonOptions sim_opts, mc_opts, cal_opts, cmp_opts;
    auto* sim = app.add_subcommand("simulate", "Run one trial and write its CSV log and summary JSON");
    add_common(sim, sim_opts, true);

    auto* mc = app.add_subcommand("montecarlo", "Run independent trials and aggregate stop statistics");
    add_common(mc, mc_opts, true);
    std::optional<long long> trials;
    mc->add_option("--trials", trials, "Number of trials (default from config, 40)");

    auto* cal = app.add_subcommand("calibrate", "Run the offset estimator over telemetry");
    add_common(cal, cal_opts, false);
    std::string telemetry;
    bool synthetic = false;
    cal->add_option("telemetry", telemetry, "CSV with t,v2,omega,vx_body,vy_body,delta_commanded");
    cal->add_flag("--synthetic", synthetic, "Synthesize a weave manoeuvre from the configured offsets");

    auto* cmp = app.add_subcommand("compare", "Run proposed and degraded modes and report side by side");
    add_common(cmp, cmp_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*sim) return cmd_simulate(sim_opts);
        if (*mc) return cmd_montecarlo(mc_opts, trials);
        if (*cal) return cmd_calibrate(cal_opts, telemetry, synthetic);
        if (*cmp) return cmd_compare(cmp_opts);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
