#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>

#include "footcal/zupt_ins.hpp"

namespace footcal {

struct RecordingResult {
  std::string recording;
  std::string method;
  double error_m = 0.0;
  double length_m = 0.0;
};

struct EcdfCurve {
  std::vector<double> values;  // sorted error values
  std::vector<double> probs;   // 1/n .. 1
};

/// Planar end-minus-start displacement; recordings start and end at the same
/// physical spot, so its norm is the position error.
inline Eigen::Vector2d loop_closure_vector(const NavTrajectory& traj) {
  if (traj.states.empty()) {
    throw std::invalid_argument("loop_closure: empty trajectory");
  }
  return (traj.states.back().p - traj.states.front().p).head<2>();
}

inline double loop_closure_error(const NavTrajectory& traj) {
  return loop_closure_vector(traj).norm();
}

inline double trajectory_length(const NavTrajectory& traj) {
  double length = 0.0;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    length += (traj.states[k].p - traj.states[k - 1].p).head<2>().norm();
  }
  return length;
}

inline double rmse(std::span<const double> errors) {
  if (errors.empty()) {
    throw std::invalid_argument("rmse: empty list");
  }
  double sum_sq = 0.0;
  for (double e : errors) sum_sq += e * e;
  return std::sqrt(sum_sq / static_cast<double>(errors.size()));
}

inline EcdfCurve ecdf(std::vector<double> errors) {
  if (errors.empty()) {
    throw std::invalid_argument("ecdf: empty list");
  }
  std::sort(errors.begin(), errors.end());
  EcdfCurve curve;
  curve.probs.resize(errors.size());
  const double n = static_cast<double>(errors.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    curve.probs[k] = static_cast<double>(k + 1) / n;
  }
  curve.values = std::move(errors);
  return curve;
}

/// Error after concatenating recordings into one virtual trajectory: the norm
/// of the vector sum of per-recording closure displacements.
inline double merged_trajectory_error(
    std::span<const Eigen::Vector2d> closure_vectors) {
  if (closure_vectors.empty()) {
    throw std::invalid_argument("merged_trajectory_error: empty group");
  }
  Eigen::Vector2d total = Eigen::Vector2d::Zero();
  for (const Eigen::Vector2d& v : closure_vectors) total += v;
  return total.norm();
}

// ---------------------------------------------------------------------------
// Plot-ready exports
// ---------------------------------------------------------------------------

inline void write_results_csv(std::span<const RecordingResult> results,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("results CSV: cannot open " + path);
  }
  std::string buf = "recording,method,error_m,length_m\n";
  for (const RecordingResult& r : results) {
    buf += r.recording;
    buf.push_back(',');
    buf += r.method;
    buf.push_back(',');
    detail::append_double(buf, r.error_m);
    buf.push_back(',');
    detail::append_double(buf, r.length_m);
    buf.push_back('\n');
  }
  out << buf;
}

inline void write_ecdf_csv(const EcdfCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("ECDF CSV: cannot open " + path);
  }
  std::string buf = "error_m,prob\n";
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    detail::append_double(buf, curve.values[k]);
    buf.push_back(',');
    detail::append_double(buf, curve.probs[k]);
    buf.push_back('\n');
  }
  out << buf;
}

}  // namespace footcal
