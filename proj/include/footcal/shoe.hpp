#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "footcal/sensor_io.hpp"
#include "footcal/strapdown.hpp"

namespace footcal {

/// Zero-velocity detection threshold on the SHOE statistic.
struct Threshold {
  double gamma = 0.0;

  explicit Threshold(double g) : gamma(g) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw std::invalid_argument("Threshold: gamma must be positive and finite");
    }
  }
};

struct DetectorParams {
  double sigma_a = 0.1;    // accel noise scale, m/s^2
  double sigma_w = 0.01;   // gyro noise scale, rad/s
  int window = 5;          // samples
  double gravity = kDefaultGravity;

  void validate() const {
    if (!(sigma_a > 0.0) || !(sigma_w > 0.0) || window < 1 || !(gravity > 0.0)) {
      throw std::invalid_argument("DetectorParams: all parameters must be positive");
    }
  }
};

/// Stance-hypothesis detection statistic over one window:
///   T = (1/W) * sum_k [ |f_k - g*fbar/|fbar||^2 / sigma_a^2
///                       + |w_k|^2 / sigma_w^2 ]
/// where fbar is the window-mean specific force.
inline double shoe_statistic(std::span<const ImuRecord> window,
                             const DetectorParams& params) {
  params.validate();
  if (window.size() != static_cast<std::size_t>(params.window)) {
    throw std::invalid_argument("shoe_statistic: window length mismatch");
  }
  Eigen::Vector3d fbar = Eigen::Vector3d::Zero();
  for (const ImuRecord& rec : window) fbar += rec.f;
  fbar /= static_cast<double>(window.size());
  const double fbar_norm = fbar.norm();
  if (fbar_norm < 1e-9) {
    throw std::runtime_error("shoe_statistic: zero-norm mean specific force");
  }
  const Eigen::Vector3d gravity_dir = (params.gravity / fbar_norm) * fbar;
  const double inv_va = 1.0 / (params.sigma_a * params.sigma_a);
  const double inv_vw = 1.0 / (params.sigma_w * params.sigma_w);
  double sum = 0.0;
  for (const ImuRecord& rec : window) {
    sum += (rec.f - gravity_dir).squaredNorm() * inv_va;
    sum += rec.w.squaredNorm() * inv_vw;
  }
  return sum / static_cast<double>(window.size());
}

/// Per-sample stationarity mask: sample k is stationary iff the statistic of
/// the window starting at k is below gamma. The tail, where no full window
/// fits, repeats the last decision.
inline ZvMask detect_zero_velocity(const ImuSequence& seq, Threshold theta,
                                   const DetectorParams& params) {
  params.validate();
  const std::size_t n = seq.size();
  const std::size_t w = static_cast<std::size_t>(params.window);
  if (n < w) {
    throw std::invalid_argument("detect_zero_velocity: sequence shorter than window");
  }
  ZvMask mask(n, 0);
  std::span<const ImuRecord> all(seq.records);
  for (std::size_t k = 0; k + w <= n; ++k) {
    mask[k] = shoe_statistic(all.subspan(k, w), params) < theta.gamma ? 1 : 0;
  }
  for (std::size_t k = n - w + 1; k < n; ++k) {
    mask[k] = mask[n - w];
  }
  return mask;
}

}  // namespace footcal
