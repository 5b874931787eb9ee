#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "footcal/hexgrid.hpp"
#include "footcal/rng.hpp"
#include "footcal/strapdown.hpp"
#include "footcal/zupt_ins.hpp"

namespace footcal {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;  // wrapped to (-pi, pi]

  Eigen::Vector2d xy() const { return {x, y}; }
};

/// Undirected hexagon-edge transition counts (the per-particle map).
using MapCounts = std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash>;

struct FootSlamConfig {
  int particles = 200;
  double alpha = 0.8;        // Dirichlet pseudo-count per exit edge
  double sigma_d = 0.05;     // m, step displacement noise
  double sigma_psi = 0.02;   // rad, heading noise
  double sigma_bias = 1e-4;  // rad/s per step, bias random walk
  HexGridConfig hex;
  double resample_ratio = 0.5;  // resample when neff < ratio * N
  std::uint64_t seed = 0;
  bool keep_history = false;
  int history_stride = 1;

  void validate() const {
    if (particles < 1 || !(alpha > 0.0) || sigma_d < 0.0 || sigma_psi < 0.0 ||
        sigma_bias < 0.0 || !(hex.radius > 0.0) || !(resample_ratio > 0.0) ||
        resample_ratio > 1.0 || history_stride < 1) {
      throw std::invalid_argument("FootSlamConfig: invalid parameters");
    }
  }
};

/// A pose hypothesis with its transition map. The pose is stored as an
/// integer anchor hexagon plus a local offset from that hexagon's center, so
/// the hexagon arithmetic is exactly lattice-periodic: translating the
/// initial cell translates every map key and leaves all probabilities
/// bit-identical.
struct Particle {
  HexCoord anchor;
  Pose local;
  double bias = 0.0;  // yaw-rate bias, rad/s
  MapCounts map;
  double weight = 0.0;
  std::vector<Pose> history;

  Pose global_pose(const HexGridConfig& hex) const {
    const Eigen::Vector2d c = hex_center(anchor, hex);
    return Pose{c.x() + local.x, c.y() + local.y, local.psi};
  }

  static Particle from_pose(const Pose& pose, const HexGridConfig& hex) {
    Particle p;
    p.anchor = point_to_hex(pose.xy(), hex);
    const Eigen::Vector2d c = hex_center(p.anchor, hex);
    p.local = Pose{pose.x - c.x(), pose.y - c.y(), pose.psi};
    return p;
  }
};

/// Per-step filter summary. weight_sum is the sum of the unnormalized
/// weights, recorded before normalization and before any resampling; it is
/// the per-step factor of the likelihood recursion.
struct StepResult {
  double weight_sum = 0.0;
  double neff = 0.0;
  bool resampled = false;
};

// ---------------------------------------------------------------------------
// Proposal and transition probability
// ---------------------------------------------------------------------------

/// Advances a particle pose by one odometry step. Draw order is fixed:
/// one normal pair for the displacement noise, one for (heading, bias).
/// The bias random walk is applied first and the updated bias corrects the
/// heading increment: dpsi_eff = z.dpsi - bias * z.dt. The returned pose is
/// in the same frame as p.local; the caller assigns it.
inline Pose propose(Particle& p, const OdometryStep& z,
                    const FootSlamConfig& cfg, SplitMix64& rng) {
  const NormalPair nd = normal_pair(rng);
  const NormalPair nh = normal_pair(rng);
  p.bias += cfg.sigma_bias * nh.second;

  const Eigen::Vector2d d =
      z.d + cfg.sigma_d * Eigen::Vector2d(nd.first, nd.second);
  const Eigen::Vector2d advance = Eigen::Rotation2Dd(p.local.psi) * d;

  Pose out;
  out.x = p.local.x + advance.x();
  out.y = p.local.y + advance.y();
  out.psi = wrap_angle(p.local.psi + z.dpsi - p.bias * z.dt +
                       cfg.sigma_psi * nh.first);
  return out;
}

namespace detail {

inline std::uint32_t edge_count(const MapCounts& map, const EdgeKey& key) {
  const auto it = map.find(key);
  return it == map.end() ? 0u : it->second;
}

inline double exit_count_sum(const MapCounts& map, HexCoord hexagon) {
  double sum = 0.0;
  for (const HexCoord& dir : hex_directions()) {
    sum += edge_count(map, make_edge(hexagon, hexagon + dir));
  }
  return sum;
}

/// Product of Dirichlet-mean transition factors over a crossing list whose
/// coordinates are relative to `anchor`. Counts are read from the map as
/// given (the per-step map update happens afterwards).
inline double transition_probability_over(const MapCounts& map,
                                          std::span<const HexCrossing> path,
                                          HexCoord anchor, double alpha) {
  double prob = 1.0;
  for (const HexCrossing& c : path) {
    const HexCoord from = anchor + c.from;
    const HexCoord to = anchor + c.to;
    const double count = edge_count(map, make_edge(from, to));
    const double denom = exit_count_sum(map, from) + 6.0 * alpha;
    prob *= (count + alpha) / denom;
  }
  return prob;
}

inline void add_crossings(MapCounts& map, std::span<const HexCrossing> path,
                          HexCoord anchor) {
  for (const HexCrossing& c : path) {
    map[make_edge(anchor + c.from, anchor + c.to)] += 1;
  }
}

}  // namespace detail

/// Map-marginal probability of moving between two poses: the product over
/// boundary crossings of (count + alpha) / (exit-hexagon count sum +
/// 6*alpha), and 1 when the poses share a hexagon.
inline double transition_probability(const MapCounts& map, const Pose& from,
                                     const Pose& to,
                                     const FootSlamConfig& cfg) {
  const std::vector<HexCrossing> path =
      crossing_path(from.xy(), to.xy(), cfg.hex);
  return detail::transition_probability_over(map, path, HexCoord{0, 0},
                                             cfg.alpha);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Systematic resampling: N draw points with a single uniform offset and
/// stride 1/N. Offspring counts are always floor(N*w) or ceil(N*w).
inline std::vector<std::size_t> systematic_resample(
    std::span<const double> weights, SplitMix64& rng) {
  const std::size_t n = weights.size();
  if (n == 0) {
    throw std::invalid_argument("systematic_resample: empty weights");
  }
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("systematic_resample: weights must sum to 1");
  }
  const double offset = uniform01(rng);
  std::vector<std::size_t> indices(n);
  std::size_t i = 0;
  double cum = weights[0];
  for (std::size_t j = 0; j < n; ++j) {
    const double u = (offset + static_cast<double>(j)) / static_cast<double>(n);
    while (u > cum && i + 1 < n) {
      ++i;
      cum += weights[i];
    }
    indices[j] = i;
  }
  return indices;
}

// ---------------------------------------------------------------------------
// Filter step
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr std::uint64_t kResampleStreamTag = 0x5e5a;
}

/// One filter update for one odometry step. Particles must carry normalized
/// weights on entry. RNG substreams are keyed by (seed, particle slot,
/// step_index), so results do not depend on evaluation order.
inline StepResult footslam_step(std::vector<Particle>& particles,
                                const OdometryStep& z,
                                const FootSlamConfig& cfg,
                                std::uint64_t step_index) {
  cfg.validate();
  const std::size_t n = particles.size();
  if (n == 0) {
    throw std::invalid_argument("footslam_step: no particles");
  }
  double weight_in = 0.0;
  for (const Particle& p : particles) weight_in += p.weight;
  if (std::abs(weight_in - 1.0) > 1e-9) {
    throw std::invalid_argument("footslam_step: weights must be normalized");
  }

  const HexGridConfig local_grid{cfg.hex.radius, Eigen::Vector2d::Zero()};
  std::vector<HexCrossing> path;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = particles[i];
    SplitMix64 rng = substream(cfg.seed, i, step_index);
    const Pose old_local = p.local;
    const Pose new_local = propose(p, z, cfg, rng);
    crossing_path_into(old_local.xy(), new_local.xy(), local_grid, path);

    const double prob =
        detail::transition_probability_over(p.map, path, p.anchor, cfg.alpha);
    detail::add_crossings(p.map, path, p.anchor);

    p.weight *= prob;
    weight_sum += p.weight;

    // Rebase so the local offset stays within one cell of the anchor.
    p.local = new_local;
    const HexCoord rel = point_to_hex(p.local.xy(), local_grid);
    if (rel != HexCoord{0, 0}) {
      p.anchor = p.anchor + rel;
      const Eigen::Vector2d c = hex_center(rel, local_grid);
      p.local.x -= c.x();
      p.local.y -= c.y();
    }
  }

  if (weight_sum <= 0.0) {
    throw std::runtime_error("footslam_step: particle depletion at step " +
                             std::to_string(step_index));
  }

  double sq = 0.0;
  for (Particle& p : particles) {
    p.weight /= weight_sum;
    sq += p.weight * p.weight;
  }
  const double neff = 1.0 / sq;

  StepResult result;
  result.weight_sum = weight_sum;
  result.neff = neff;
  result.resampled = neff < cfg.resample_ratio * static_cast<double>(n);

  if (result.resampled) {
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = particles[i].weight;
    SplitMix64 rng =
        substream(cfg.seed, step_index, detail::kResampleStreamTag);
    const std::vector<std::size_t> indices = systematic_resample(weights, rng);
    std::vector<Particle> next;
    next.reserve(n);
    for (std::size_t idx : indices) {
      next.push_back(particles[idx]);  // deep copy, maps included
      next.back().weight = 1.0 / static_cast<double>(n);
    }
    particles = std::move(next);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

/// Initial placement: an anchor cell plus a pose relative to that cell's
/// center. Shifting `cell` by a lattice vector shifts the whole run exactly.
struct FilterInit {
  HexCoord cell;
  Pose local;
};

struct FootSlamResult {
  std::vector<Pose> estimates;  // weighted-mean pose, entry 0 = initial
  MapCounts final_map;          // map of the highest-weight particle
  std::vector<StepResult> steps;
  std::vector<Particle> particles;  // final ensemble (histories included)
};

inline FootSlamResult run_footslam(std::span<const OdometryStep> odometry,
                                   const FootSlamConfig& cfg,
                                   const FilterInit& init) {
  cfg.validate();
  if (odometry.empty()) {
    throw std::invalid_argument("run_footslam: empty odometry");
  }
  const std::size_t n = static_cast<std::size_t>(cfg.particles);
  std::vector<Particle> particles(n);
  for (Particle& p : particles) {
    p.anchor = init.cell;
    p.local = init.local;
    p.weight = 1.0 / static_cast<double>(n);
  }

  auto weighted_mean = [&](const std::vector<Particle>& ps) {
    double x = 0.0, y = 0.0, sin_sum = 0.0, cos_sum = 0.0;
    for (const Particle& p : ps) {
      const Pose g = p.global_pose(cfg.hex);
      x += p.weight * g.x;
      y += p.weight * g.y;
      sin_sum += p.weight * std::sin(g.psi);
      cos_sum += p.weight * std::cos(g.psi);
    }
    return Pose{x, y, std::atan2(sin_sum, cos_sum)};
  };

  FootSlamResult result;
  result.estimates.reserve(odometry.size() + 1);
  result.estimates.push_back(weighted_mean(particles));
  result.steps.reserve(odometry.size());

  for (std::size_t k = 0; k < odometry.size(); ++k) {
    const StepResult step =
        footslam_step(particles, odometry[k], cfg, k + 1);
    result.estimates.push_back(weighted_mean(particles));
    result.steps.push_back(step);
    if (cfg.keep_history &&
        (k % static_cast<std::size_t>(cfg.history_stride) == 0)) {
      for (Particle& p : particles) {
        p.history.push_back(p.global_pose(cfg.hex));
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < particles.size(); ++i) {
    if (particles[i].weight > particles[best].weight) best = i;
  }
  result.final_map = particles[best].map;
  result.particles = std::move(particles);
  return result;
}

inline FootSlamResult run_footslam(std::span<const OdometryStep> odometry,
                                   const FootSlamConfig& cfg) {
  const Particle origin = Particle::from_pose(Pose{}, cfg.hex);
  return run_footslam(odometry, cfg, FilterInit{origin.anchor, origin.local});
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

inline void write_map_csv(const MapCounts& map, const std::string& path) {
  std::vector<std::pair<EdgeKey, std::uint32_t>> rows(map.begin(), map.end());
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("map CSV: cannot open " + path);
  }
  out << "q1,r1,q2,r2,count\n";
  for (const auto& [edge, count] : rows) {
    out << edge.a.q << ',' << edge.a.r << ',' << edge.b.q << ',' << edge.b.r
        << ',' << count << '\n';
  }
}

inline void write_estimates_csv(std::span<const Pose> estimates,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("estimate CSV: cannot open " + path);
  }
  std::string buf = "k,x,y,psi\n";
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    buf += std::to_string(k);
    for (double v : {estimates[k].x, estimates[k].y, estimates[k].psi}) {
      buf.push_back(',');
      detail::append_double(buf, v);
    }
    buf.push_back('\n');
  }
  out << buf;
}

inline void write_steps_csv(std::span<const StepResult> steps,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("steps CSV: cannot open " + path);
  }
  std::string buf = "k,weight_sum,neff,resampled\n";
  for (std::size_t k = 0; k < steps.size(); ++k) {
    buf += std::to_string(k + 1);
    buf.push_back(',');
    detail::append_double(buf, steps[k].weight_sum);
    buf.push_back(',');
    detail::append_double(buf, steps[k].neff);
    buf.push_back(',');
    buf.push_back(steps[k].resampled ? '1' : '0');
    buf.push_back('\n');
  }
  out << buf;
}

}  // namespace footcal
