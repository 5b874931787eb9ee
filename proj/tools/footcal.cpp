// Command-line front end: simulate -> odometry -> slam -> calibrate ->
// evaluate, with JSON config files and explicit seeds everywhere. Exit codes:
// 0 success, 2 usage/config error, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "footcal/calibration.hpp"
#include "footcal/eval.hpp"
#include "footcal/footslam.hpp"
#include "footcal/gaitsim.hpp"
#include "footcal/sensor_io.hpp"
#include "footcal/zupt_ins.hpp"

namespace fs = std::filesystem;
using namespace footcal;

namespace {

void require_file(const std::string& path) {
  if (!fs::exists(path)) {
    throw std::invalid_argument("no such file: " + path);
  }
}

struct DetectorFlags {
  DetectorParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sigma-a", params.sigma_a, "detector accel noise scale [m/s^2]");
    cmd->add_option("--sigma-w", params.sigma_w, "detector gyro noise scale [rad/s]");
    cmd->add_option("--window", params.window, "detector window length [samples]");
    cmd->add_option("--gravity", params.gravity, "gravity magnitude [m/s^2]");
  }
};

struct InsFlags {
  ZuptInsConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--zupt-std", cfg.zupt_noise_std, "ZUPT measurement std [m/s]");
    cmd->add_flag("--smooth", cfg.smooth, "run the fixed-interval smoother");
  }
};

struct SlamFlags {
  FootSlamConfig cfg;

  void attach(CLI::App* cmd, bool seed_required) {
    cmd->add_option("--particles", cfg.particles, "particle count");
    cmd->add_option("--alpha", cfg.alpha, "Dirichlet pseudo-count");
    cmd->add_option("--sigma-d", cfg.sigma_d, "proposal displacement noise [m]");
    cmd->add_option("--sigma-psi", cfg.sigma_psi, "proposal heading noise [rad]");
    cmd->add_option("--sigma-bias", cfg.sigma_bias, "bias random walk [rad/s]");
    cmd->add_option("--hex-radius", cfg.hex.radius, "hexagon circumradius [m]");
    cmd->add_option("--resample-ratio", cfg.resample_ratio,
                    "resample when neff < ratio*N");
    auto* seed = cmd->add_option("--seed", cfg.seed, "RNG seed");
    if (seed_required) seed->required();
  }
};

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  require_file(scenario_path);
  Scenario sc = load_scenario(scenario_path);
  if (seed_override) {
    sc.noise.seed = *seed_override;
    sc.gait.gait_seed = *seed_override;
  }

  fs::create_directories(out_dir);
  const GroundTruth gt = synth_trajectory(sc.trajectory, sc.gait, sc.fs);
  const ImuSequence seq = imu_from_trajectory(gt, sc.noise);

  const std::string imu_path = (fs::path(out_dir) / "imu.csv").string();
  const std::string truth_path = (fs::path(out_dir) / "truth.csv").string();
  write_imu_csv(seq, imu_path);
  write_ground_truth_csv(gt, truth_path);
  std::cout << imu_path << "\n" << truth_path << "\n";
  return 0;
}

int cmd_odometry(const std::string& imu_path, double gamma,
                 const DetectorFlags& det, const InsFlags& ins,
                 const std::string& traj_out, const std::string& odo_out) {
  require_file(imu_path);
  const ImuSequence seq = parse_imu_csv(imu_path);
  const NavTrajectory traj =
      run_zupt_ins(seq, Threshold(gamma), det.params, ins.cfg);
  if (!traj_out.empty()) write_trajectory_csv(traj, traj_out);
  const std::vector<OdometryStep> odo = extract_odometry(traj);
  if (!odo_out.empty()) write_odometry_csv(odo, odo_out);
  std::printf("strides=%zu loop_closure_m=%.6f\n", odo.size(),
              loop_closure_error(traj));
  return 0;
}

int cmd_slam(const std::string& odo_path, const SlamFlags& slam,
             const std::string& map_out, const std::string& est_out,
             const std::string& steps_out) {
  require_file(odo_path);
  const std::vector<OdometryStep> odo = read_odometry_csv(odo_path);
  const FootSlamResult result = run_footslam(odo, slam.cfg);
  if (!map_out.empty()) write_map_csv(result.final_map, map_out);
  if (!est_out.empty()) write_estimates_csv(result.estimates, est_out);
  if (!steps_out.empty()) write_steps_csv(result.steps, steps_out);
  const LikelihoodTrace trace = accumulate_likelihood(result.steps);
  std::printf("steps=%zu loglik=%.9f\n", trace.steps(), trace.cumulative);
  return 0;
}

int cmd_calibrate(const std::string& imu_path, const std::string& manifest_path,
                  double grid_min, double grid_max, int grid_size,
                  bool grid_auto, const DetectorFlags& det, const InsFlags& ins,
                  const SlamFlags& slam, int jobs,
                  const std::string& report_out) {
  auto grid_for = [&](const ImuSequence& seq) {
    if (grid_auto) {
      const GridBounds bounds = suggest_grid_bounds(seq, det.params);
      std::printf("auto grid bounds: [%.6g, %.6g]\n", bounds.gamma_min,
                  bounds.gamma_max);
      return make_grid(bounds.gamma_min, bounds.gamma_max, grid_size);
    }
    return make_grid(grid_min, grid_max, grid_size);
  };

  auto print_report = [](const CalibrationReport& report) {
    std::printf("%-14s %-16s %-8s %s\n", "gamma", "loglik", "steps",
                "loop_closure_m");
    for (const ThresholdOutcome& row : report.thresholds) {
      if (row.failed()) {
        std::printf("%-14.6g %-16s %-8s (%s)\n", row.gamma, "-inf", "-",
                    row.note.c_str());
      } else {
        std::printf("%-14.6g %-16.6f %-8zu %.6f\n", row.gamma, row.loglik,
                    row.steps, row.odometry_loop_closure_m);
      }
    }
    std::printf("chosen gamma: %.6g\n", report.chosen_gamma);
  };

  if (!imu_path.empty()) {
    require_file(imu_path);
    const ImuSequence seq = parse_imu_csv(imu_path);
    const CalibrationReport report =
        calibrate(seq, grid_for(seq), det.params, ins.cfg, slam.cfg, jobs);
    print_report(report);
    if (!report_out.empty()) write_report_json(report, report_out);
    return 0;
  }

  require_file(manifest_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  nlohmann::json classes = nlohmann::json::object();
  nlohmann::json chosen = nlohmann::json::object();
  bool any = false;
  for (const ManifestEntry& entry : manifest) {
    if (entry.role != RecordingRole::calibration) continue;
    any = true;
    require_file(entry.path);
    const ImuSequence seq = parse_imu_csv(entry.path);
    const CalibrationReport report =
        calibrate(seq, grid_for(seq), det.params, ins.cfg, slam.cfg, jobs);
    std::printf("== class '%s' (%s)\n", entry.label.c_str(),
                entry.path.c_str());
    print_report(report);
    classes[entry.label] = report_to_json(report);
    chosen[entry.label] = report.chosen_gamma;
  }
  if (!any) {
    throw std::invalid_argument("manifest has no calibration recordings");
  }
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    if (!out) {
      throw std::runtime_error("cannot open " + report_out + " for writing");
    }
    out << nlohmann::json{{"per_class_thresholds", chosen},
                          {"classes", classes}}
               .dump(2)
        << '\n';
  }
  return 0;
}

std::string sanitize_method_name(std::string name) {
  for (char& c : name) {
    if (c == ':' || c == '/' || c == ' ') c = '_';
  }
  return name;
}

int cmd_evaluate(const std::string& manifest_path,
                 const std::string& thresholds_path, double grid_min,
                 double grid_max, int grid_size, double classifier_gamma,
                 const DetectorFlags& det, const InsFlags& ins, int jobs,
                 const std::string& out_dir) {
  require_file(manifest_path);
  require_file(thresholds_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  bool any_eval = false;
  for (const ManifestEntry& e : manifest) {
    if (e.role == RecordingRole::evaluation) {
      require_file(e.path);
      any_eval = true;
    }
  }
  if (!any_eval) {
    throw std::invalid_argument("manifest has no evaluation recordings");
  }

  std::map<std::string, double> per_class;
  {
    std::ifstream in(thresholds_path);
    nlohmann::json j;
    in >> j;
    if (j.contains("per_class_thresholds")) j = j.at("per_class_thresholds");
    for (const auto& [label, gamma] : j.items()) {
      per_class[label] = gamma.get<double>();
    }
  }
  if (per_class.empty()) {
    throw std::invalid_argument("no per-class thresholds in " + thresholds_path);
  }

  BenchmarkConfig cfg;
  cfg.detector = det.params;
  cfg.ins = ins.cfg;
  cfg.classifier_gamma = classifier_gamma;
  const ThresholdGrid grid = make_grid(grid_min, grid_max, grid_size);
  const BenchmarkTable table =
      benchmark_fixed_and_classified(manifest, per_class, grid, cfg, jobs);

  fs::create_directories(out_dir);
  std::vector<RecordingResult> all;
  for (const MethodSummary& m : table.methods) {
    all.insert(all.end(), m.recordings.begin(), m.recordings.end());
    std::vector<double> errors;
    for (const RecordingResult& r : m.recordings) errors.push_back(r.error_m);
    const std::string ecdf_path =
        (fs::path(out_dir) / ("ecdf_" + sanitize_method_name(m.method) + ".csv"))
            .string();
    write_ecdf_csv(ecdf(errors), ecdf_path);
    std::printf("%-16s rmse_m=%.6f merged_error_m=%.6f\n", m.method.c_str(),
                m.rmse_m, m.merged_error_m);
  }
  write_results_csv(all, (fs::path(out_dir) / "results.csv").string());
  std::ofstream summary((fs::path(out_dir) / "summary.json").string());
  summary << summary_to_json(table).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ZUPT-aided inertial odometry, FootSLAM, and maximum-likelihood "
               "threshold calibration"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic recording");
  std::string scenario_path, sim_out_dir;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
  sim->add_option("--out-dir", sim_out_dir, "output directory")->required();
  sim->add_option("--seed", sim_seed, "override the scenario seed");

  // odometry
  auto* odo = app.add_subcommand("odometry", "ZUPT-aided INS over an IMU CSV");
  std::string odo_imu, odo_traj_out, odo_odo_out;
  double odo_gamma = 0.0;
  DetectorFlags odo_det;
  InsFlags odo_ins;
  odo->add_option("--imu", odo_imu, "IMU CSV")->required();
  odo->add_option("--gamma", odo_gamma, "detection threshold")->required();
  odo->add_option("--traj-out", odo_traj_out, "trajectory CSV output");
  odo->add_option("--odo-out", odo_odo_out, "odometry CSV output");
  odo_det.attach(odo);
  odo_ins.attach(odo);

  // slam
  auto* slam = app.add_subcommand("slam", "particle filter over odometry");
  std::string slam_odo, slam_map_out, slam_est_out, slam_steps_out;
  SlamFlags slam_flags;
  slam->add_option("--odo", slam_odo, "odometry CSV")->required();
  slam->add_option("--map-out", slam_map_out, "transition-count CSV output");
  slam->add_option("--est-out", slam_est_out, "trajectory estimate CSV output");
  slam->add_option("--steps-out", slam_steps_out, "per-step weight-sum CSV output");
  slam_flags.attach(slam, /*seed_required=*/true);

  // calibrate
  auto* cal = app.add_subcommand("calibrate",
                                 "maximum-likelihood threshold estimation");
  std::string cal_imu, cal_manifest, cal_report_out;
  double cal_grid_min = 1e2, cal_grid_max = 1e6;
  int cal_grid_size = 25;
  bool cal_grid_auto = false;
  int cal_jobs = 1;
  DetectorFlags cal_det;
  InsFlags cal_ins;
  SlamFlags cal_slam;
  auto* cal_imu_opt = cal->add_option("--imu", cal_imu, "IMU CSV");
  auto* cal_manifest_opt =
      cal->add_option("--manifest", cal_manifest,
                      "dataset manifest (calibrates each calibration entry)");
  cal_imu_opt->excludes(cal_manifest_opt);
  cal->add_option("--grid-min", cal_grid_min, "smallest threshold");
  cal->add_option("--grid-max", cal_grid_max, "largest threshold");
  cal->add_option("--grid-size", cal_grid_size, "number of thresholds");
  cal->add_flag("--grid-auto", cal_grid_auto,
                "derive the grid bounds from the recording itself");
  cal->add_option("--jobs", cal_jobs, "worker threads for the sweep");
  cal->add_option("--report-out", cal_report_out, "report JSON output");
  cal_det.attach(cal);
  cal_ins.attach(cal);
  cal_slam.attach(cal, /*seed_required=*/true);

  // evaluate
  auto* eval = app.add_subcommand("evaluate",
                                  "adaptive / classified / fixed comparison");
  std::string eval_manifest, eval_thresholds, eval_out_dir;
  double eval_grid_min = 1e2, eval_grid_max = 1e6;
  int eval_grid_size = 25;
  double eval_classifier_gamma = 1e3;
  int eval_jobs = 1;
  DetectorFlags eval_det;
  InsFlags eval_ins;
  eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  eval->add_option("--class-thresholds", eval_thresholds,
                   "per-class thresholds JSON (from calibrate --manifest)")
      ->required();
  eval->add_option("--out-dir", eval_out_dir, "output directory")->required();
  eval->add_option("--grid-min", eval_grid_min, "smallest fixed threshold");
  eval->add_option("--grid-max", eval_grid_max, "largest fixed threshold");
  eval->add_option("--grid-size", eval_grid_size, "number of fixed thresholds");
  eval->add_option("--classifier-gamma", eval_classifier_gamma,
                   "threshold used for speed measurement");
  eval->add_option("--jobs", eval_jobs, "worker threads over recordings");
  eval_det.attach(eval);
  eval_ins.attach(eval);

  try {
    app.parse(argc, argv);
    if (sim->parsed()) {
      return cmd_simulate(scenario_path, sim_out_dir, sim_seed);
    }
    if (odo->parsed()) {
      return cmd_odometry(odo_imu, odo_gamma, odo_det, odo_ins, odo_traj_out,
                          odo_odo_out);
    }
    if (slam->parsed()) {
      return cmd_slam(slam_odo, slam_flags, slam_map_out, slam_est_out,
                      slam_steps_out);
    }
    if (cal->parsed()) {
      if (cal_imu.empty() && cal_manifest.empty()) {
        throw std::invalid_argument("calibrate: need --imu or --manifest");
      }
      return cmd_calibrate(cal_imu, cal_manifest, cal_grid_min, cal_grid_max,
                           cal_grid_size, cal_grid_auto, cal_det, cal_ins,
                           cal_slam, cal_jobs, cal_report_out);
    }
    if (eval->parsed()) {
      return cmd_evaluate(eval_manifest, eval_thresholds, eval_grid_min,
                          eval_grid_max, eval_grid_size, eval_classifier_gamma,
                          eval_det, eval_ins, eval_jobs, eval_out_dir);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
