#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "footcal/eval.hpp"
#include "footcal/footslam.hpp"
#include "footcal/parallel.hpp"
#include "footcal/sensor_io.hpp"
#include "footcal/shoe.hpp"
#include "footcal/zupt_ins.hpp"

namespace footcal {

// ---------------------------------------------------------------------------
// Threshold grid
// ---------------------------------------------------------------------------

struct ThresholdGrid {
  std::vector<double> gammas;  // strictly increasing, size >= 2

  std::size_t size() const { return gammas.size(); }

  void validate() const {
    if (gammas.size() < 2) {
      throw std::invalid_argument("ThresholdGrid: need at least 2 thresholds");
    }
    for (std::size_t j = 0; j < gammas.size(); ++j) {
      if (!(gammas[j] > 0.0) || !std::isfinite(gammas[j])) {
        throw std::invalid_argument("ThresholdGrid: thresholds must be positive");
      }
      if (j > 0 && !(gammas[j] > gammas[j - 1])) {
        throw std::invalid_argument("ThresholdGrid: thresholds must increase");
      }
    }
  }
};

/// Geometrically spaced candidate thresholds, endpoints inclusive.
inline ThresholdGrid make_grid(double gamma_min, double gamma_max, int size) {
  if (!(gamma_min > 0.0) || !(gamma_max > gamma_min)) {
    throw std::invalid_argument("make_grid: need 0 < gamma_min < gamma_max");
  }
  if (size < 2) {
    throw std::invalid_argument("make_grid: need at least 2 thresholds");
  }
  ThresholdGrid grid;
  grid.gammas.resize(static_cast<std::size_t>(size));
  const double log_min = std::log(gamma_min);
  const double log_max = std::log(gamma_max);
  for (int j = 0; j < size; ++j) {
    const double frac = static_cast<double>(j) / (size - 1);
    grid.gammas[static_cast<std::size_t>(j)] =
        std::exp(log_min + frac * (log_max - log_min));
  }
  grid.gammas.front() = gamma_min;
  grid.gammas.back() = gamma_max;
  grid.validate();
  return grid;
}

inline ThresholdGrid default_grid() { return make_grid(1e2, 1e6, 25); }

struct GridBounds {
  double gamma_min = 0.0;
  double gamma_max = 0.0;
};

/// Data-driven grid bounds, needing no labels or ground truth. A threshold
/// is only sensible while ZUPTs fire when the foot is near-stationary, so
/// the stationary fraction it produces must stay close to the recording's
/// actual stance share. That share is estimated from the fraction flagged at
/// an anchor threshold a fixed factor above the quiet-stance statistic floor (taken
/// from the leading stationary interval); the upper bound is the statistic
/// quantile at that share plus a small margin, and the lower bound spans
/// `decades` below it.
inline GridBounds suggest_grid_bounds(const ImuSequence& seq,
                                      const DetectorParams& det,
                                      double anchor_multiplier = 2.0,
                                      double margin = 0.01,
                                      double decades = 4.0) {
  det.validate();
  if (!(anchor_multiplier > 1.0) || !(margin >= 0.0) || margin >= 1.0 ||
      !(decades > 0.0)) {
    throw std::invalid_argument("suggest_grid_bounds: invalid parameters");
  }
  const std::size_t w = static_cast<std::size_t>(det.window);
  if (seq.size() < 2 * w) {
    throw std::invalid_argument("suggest_grid_bounds: sequence too short");
  }
  std::vector<double> stats;
  stats.reserve(seq.size() - w + 1);
  std::span<const ImuRecord> all(seq.records);
  for (std::size_t k = 0; k + w <= seq.size(); ++k) {
    stats.push_back(shoe_statistic(all.subspan(k, w), det));
  }

  // Quiet-stance floor from the leading stationary interval.
  const std::size_t lead =
      std::min(stats.size(), std::max<std::size_t>(w, static_cast<std::size_t>(
                                                          0.5 * seq.fs)));
  std::vector<double> lead_stats(stats.begin(),
                                 stats.begin() + static_cast<std::ptrdiff_t>(lead));
  std::nth_element(lead_stats.begin(), lead_stats.begin() + lead_stats.size() / 2,
                   lead_stats.end());
  const double floor = lead_stats[lead_stats.size() / 2];
  const double anchor = anchor_multiplier * std::max(floor, 1e-12);

  double flagged = 0.0;
  for (double s : stats) {
    if (s < anchor) flagged += 1.0;
  }
  const double share =
      std::min(0.99, flagged / static_cast<double>(stats.size()) + margin);
  const std::size_t rank = std::min(
      stats.size() - 1,
      static_cast<std::size_t>(share * static_cast<double>(stats.size())));
  std::nth_element(stats.begin(),
                   stats.begin() + static_cast<std::ptrdiff_t>(rank),
                   stats.end());
  GridBounds bounds;
  bounds.gamma_max = std::max(stats[rank], 1e-12);
  bounds.gamma_min = bounds.gamma_max / std::pow(10.0, decades);
  return bounds;
}

// ---------------------------------------------------------------------------
// Likelihood recursion
// ---------------------------------------------------------------------------

/// Per-step log increments of the likelihood approximation. The cumulative
/// value is the log of the product of pre-normalization weight sums, with the
/// empty product equal to 1 (cumulative 0).
struct LikelihoodTrace {
  std::vector<double> log_increments;
  double cumulative = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();

  std::size_t steps() const { return log_increments.size(); }
};

inline LikelihoodTrace accumulate_likelihood(std::span<const StepResult> results) {
  LikelihoodTrace trace;
  trace.log_increments.reserve(results.size());
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (!(results[k].weight_sum > 0.0)) {
      throw std::runtime_error(
          "accumulate_likelihood: zero weight sum at step " +
          std::to_string(k + 1));
    }
    const double inc = std::log(results[k].weight_sum);
    trace.log_increments.push_back(inc);
    trace.cumulative += inc;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Grid-search calibration
// ---------------------------------------------------------------------------

struct ThresholdOutcome {
  double gamma = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  double odometry_loop_closure_m = std::numeric_limits<double>::quiet_NaN();
  double loglik_per_step = std::numeric_limits<double>::quiet_NaN();
  std::string note;  // non-empty when the pipeline failed for this threshold

  bool failed() const { return !std::isfinite(loglik); }
};

struct CalibrationReport {
  std::vector<ThresholdOutcome> thresholds;
  std::size_t chosen_index = 0;
  double chosen_gamma = 0.0;
  std::string tie_note;
};

/// Grid search over detection thresholds: for each candidate, compute the
/// odometry, run the particle filter on it (all candidates share the same
/// seed, i.e. common random numbers), and accumulate the likelihood. The
/// chosen threshold maximizes the cumulative log-likelihood; ties within 1e-9
/// go to the smaller threshold. Candidates whose odometry extraction fails
/// are kept in the report with a -inf likelihood.
inline CalibrationReport calibrate(const ImuSequence& seq,
                                   const ThresholdGrid& grid,
                                   const DetectorParams& det,
                                   const ZuptInsConfig& ins_cfg,
                                   const FootSlamConfig& slam_cfg,
                                   int jobs = 1) {
  grid.validate();
  det.validate();
  slam_cfg.validate();

  CalibrationReport report;
  report.thresholds.resize(grid.size());

  parallel_for_index(grid.size(), jobs, [&](std::size_t j) {
    ThresholdOutcome& row = report.thresholds[j];
    row.gamma = grid.gammas[j];
    try {
      const NavTrajectory traj =
          run_zupt_ins(seq, Threshold(row.gamma), det, ins_cfg);
      const std::vector<OdometryStep> odometry = extract_odometry(traj);
      const FootSlamResult slam = run_footslam(odometry, slam_cfg);
      LikelihoodTrace trace = accumulate_likelihood(slam.steps);
      trace.gamma = row.gamma;
      row.loglik = trace.cumulative;
      row.steps = trace.steps();
      row.loglik_per_step =
          row.steps > 0 ? trace.cumulative / static_cast<double>(row.steps)
                        : 0.0;
      const std::vector<Eigen::Vector3d> composed = compose_odometry(odometry);
      row.odometry_loop_closure_m =
          (composed.back().head<2>() - composed.front().head<2>()).norm();
    } catch (const std::exception& e) {
      row.note = e.what();
      row.loglik = -std::numeric_limits<double>::infinity();
    }
  });

  bool any_finite = false;
  std::size_t best = 0;
  for (std::size_t j = 0; j < report.thresholds.size(); ++j) {
    if (report.thresholds[j].failed()) continue;
    if (!any_finite ||
        report.thresholds[j].loglik > report.thresholds[best].loglik + 1e-9) {
      best = j;
      any_finite = true;
    }
  }
  if (!any_finite) {
    throw std::runtime_error("calibrate: all thresholds failed");
  }
  for (std::size_t j = 0; j < report.thresholds.size(); ++j) {
    if (j == best || report.thresholds[j].failed()) continue;
    if (std::abs(report.thresholds[j].loglik - report.thresholds[best].loglik) <=
        1e-9) {
      report.tie_note = "tie within 1e-9; smaller threshold chosen";
      break;
    }
  }
  report.chosen_index = best;
  report.chosen_gamma = report.thresholds[best].gamma;
  return report;
}

inline nlohmann::json report_to_json(const CalibrationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ThresholdOutcome& row : report.thresholds) {
    nlohmann::json r = {{"gamma", row.gamma},
                        {"steps", row.steps}};
    if (row.failed()) {
      r["loglik"] = nullptr;
      r["note"] = row.note;
    } else {
      r["loglik"] = row.loglik;
      r["loglik_per_step"] = row.loglik_per_step;
      r["loop_closure_m"] = row.odometry_loop_closure_m;
    }
    rows.push_back(std::move(r));
  }
  nlohmann::json j = {{"thresholds", std::move(rows)},
                      {"chosen_gamma", report.chosen_gamma},
                      {"chosen_index", report.chosen_index}};
  if (!report.tie_note.empty()) j["tie_note"] = report.tie_note;
  return j;
}

inline void write_report_json(const CalibrationReport& report,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("report: cannot open " + path + " for writing");
  }
  out << report_to_json(report).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Speed-based gait classification (benchmark method)
// ---------------------------------------------------------------------------

enum class GaitClass { walk, fast_walk, jog };

inline std::string to_string(GaitClass c) {
  switch (c) {
    case GaitClass::walk: return "walk";
    case GaitClass::fast_walk: return "fast-walk";
    case GaitClass::jog: return "jog";
  }
  return "?";
}

/// Average horizontal ground speed while in movement: planar distance
/// covered between the first and last non-stationary sample divided by that
/// span's duration (stance dwell inside the span counts as moving time).
inline double average_moving_speed_kmh(const NavTrajectory& traj) {
  const std::size_t n = traj.size();
  std::size_t first = n, last = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (!traj.zv_mask[k]) {
      if (first == n) first = k;
      last = k;
    }
  }
  if (first == n) {
    throw std::runtime_error("speed_classify: all samples stationary");
  }
  const double elapsed = traj.states[last].t - traj.states[first].t;
  if (!(elapsed > 0.0)) {
    throw std::runtime_error("speed_classify: movement span too short");
  }
  double distance = 0.0;
  for (std::size_t k = first + 1; k <= last; ++k) {
    distance += (traj.states[k].p - traj.states[k - 1].p).head<2>().norm();
  }
  return 3.6 * distance / elapsed;
}

inline GaitClass speed_classify(const NavTrajectory& traj,
                                double cut_low_kmh = 5.5,
                                double cut_high_kmh = 7.5) {
  const double speed = average_moving_speed_kmh(traj);
  if (speed > cut_high_kmh) return GaitClass::jog;
  if (speed < cut_low_kmh) return GaitClass::walk;
  return GaitClass::fast_walk;
}

// ---------------------------------------------------------------------------
// Fixed / classified / adaptive benchmark
// ---------------------------------------------------------------------------

struct BenchmarkConfig {
  DetectorParams detector;
  ZuptInsConfig ins;
  double classifier_gamma = 1e3;  // threshold used only to measure speed
  double cut_low_kmh = 5.5;
  double cut_high_kmh = 7.5;
};

struct MethodSummary {
  std::string method;
  std::vector<RecordingResult> recordings;
  std::vector<Eigen::Vector2d> closure_vectors;
  double rmse_m = 0.0;
  double merged_error_m = 0.0;
};

struct BenchmarkTable {
  std::vector<MethodSummary> methods;
};

/// Per-recording loop-closure errors for (i) the per-class adaptive
/// threshold selected by the recording's label, (ii) the speed-classified
/// threshold, and (iii) every fixed threshold in the grid.
inline BenchmarkTable benchmark_fixed_and_classified(
    const DatasetManifest& eval_manifest,
    const std::map<std::string, double>& per_class_thresholds,
    const ThresholdGrid& fixed_grid, const BenchmarkConfig& cfg,
    int jobs = 1) {
  fixed_grid.validate();
  std::vector<const ManifestEntry*> entries;
  for (const ManifestEntry& e : eval_manifest) {
    if (e.role == RecordingRole::evaluation) entries.push_back(&e);
  }
  if (entries.empty()) {
    throw std::runtime_error("benchmark: no evaluation recordings in manifest");
  }

  struct PerRecording {
    Eigen::Vector2d adaptive_closure;
    double adaptive_length = 0.0;
    Eigen::Vector2d classified_closure;
    double classified_length = 0.0;
    std::vector<Eigen::Vector2d> fixed_closures;
    std::vector<double> fixed_lengths;
  };
  std::vector<PerRecording> per_rec(entries.size());

  parallel_for_index(entries.size(), jobs, [&](std::size_t i) {
    const ManifestEntry& entry = *entries[i];
    const ImuSequence seq = parse_imu_csv(entry.path);
    PerRecording& rec = per_rec[i];

    auto run_at = [&](double gamma) {
      return run_zupt_ins(seq, Threshold(gamma), cfg.detector, cfg.ins);
    };

    const auto adaptive_it = per_class_thresholds.find(entry.label);
    if (adaptive_it == per_class_thresholds.end()) {
      throw std::runtime_error("benchmark: no threshold for class '" +
                               entry.label + "'");
    }
    const NavTrajectory adaptive_traj = run_at(adaptive_it->second);
    rec.adaptive_closure = loop_closure_vector(adaptive_traj);
    rec.adaptive_length = trajectory_length(adaptive_traj);

    const NavTrajectory classifier_traj = run_at(cfg.classifier_gamma);
    const GaitClass cls =
        speed_classify(classifier_traj, cfg.cut_low_kmh, cfg.cut_high_kmh);
    const auto class_it = per_class_thresholds.find(to_string(cls));
    if (class_it == per_class_thresholds.end()) {
      throw std::runtime_error("benchmark: no threshold for classified class '" +
                               to_string(cls) + "'");
    }
    const NavTrajectory classified_traj = run_at(class_it->second);
    rec.classified_closure = loop_closure_vector(classified_traj);
    rec.classified_length = trajectory_length(classified_traj);

    rec.fixed_closures.resize(fixed_grid.size());
    rec.fixed_lengths.resize(fixed_grid.size());
    for (std::size_t g = 0; g < fixed_grid.size(); ++g) {
      const NavTrajectory traj = run_at(fixed_grid.gammas[g]);
      rec.fixed_closures[g] = loop_closure_vector(traj);
      rec.fixed_lengths[g] = trajectory_length(traj);
    }
  });

  BenchmarkTable table;
  auto add_method = [&](const std::string& name, auto closure_of,
                        auto length_of) {
    MethodSummary m;
    m.method = name;
    std::vector<double> errors;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Eigen::Vector2d closure = closure_of(per_rec[i]);
      m.closure_vectors.push_back(closure);
      m.recordings.push_back(RecordingResult{entries[i]->path, name,
                                             closure.norm(),
                                             length_of(per_rec[i])});
      errors.push_back(closure.norm());
    }
    m.rmse_m = rmse(errors);
    m.merged_error_m = merged_trajectory_error(m.closure_vectors);
    table.methods.push_back(std::move(m));
  };

  add_method(
      "adaptive", [](const PerRecording& r) { return r.adaptive_closure; },
      [](const PerRecording& r) { return r.adaptive_length; });
  add_method(
      "benchmark", [](const PerRecording& r) { return r.classified_closure; },
      [](const PerRecording& r) { return r.classified_length; });
  for (std::size_t g = 0; g < fixed_grid.size(); ++g) {
    std::string name = "fixed:";
    {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", fixed_grid.gammas[g]);
      name += buf;
    }
    add_method(
        name, [g](const PerRecording& r) { return r.fixed_closures[g]; },
        [g](const PerRecording& r) { return r.fixed_lengths[g]; });
  }
  return table;
}

inline nlohmann::json summary_to_json(const BenchmarkTable& table) {
  nlohmann::json methods = nlohmann::json::array();
  for (const MethodSummary& m : table.methods) {
    methods.push_back({{"method", m.method},
                       {"rmse_m", m.rmse_m},
                       {"merged_error_m", m.merged_error_m},
                       {"recordings", m.recordings.size()}});
  }
  return nlohmann::json{{"methods", std::move(methods)}};
}

}  // namespace footcal
