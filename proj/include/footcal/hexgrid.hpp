#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "footcal/rng.hpp"

namespace footcal {

/// Axial coordinates of a pointy-top hexagon.
struct HexCoord {
  int q = 0;
  int r = 0;

  friend auto operator<=>(const HexCoord&, const HexCoord&) = default;
  HexCoord operator+(HexCoord o) const { return {q + o.q, r + o.r}; }
  HexCoord operator-(HexCoord o) const { return {q - o.q, r - o.r}; }
};

struct HexGridConfig {
  double radius = 0.5;  // circumradius, m
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
};

inline const std::array<HexCoord, 6>& hex_directions() {
  static const std::array<HexCoord, 6> dirs = {
      HexCoord{1, 0}, HexCoord{1, -1}, HexCoord{0, -1},
      HexCoord{-1, 0}, HexCoord{-1, 1}, HexCoord{0, 1}};
  return dirs;
}

inline std::array<HexCoord, 6> neighbors(HexCoord h) {
  std::array<HexCoord, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = h + hex_directions()[i];
  return out;
}

inline bool adjacent(HexCoord a, HexCoord b) {
  const HexCoord d = b - a;
  for (const HexCoord& dir : hex_directions()) {
    if (d == dir) return true;
  }
  return false;
}

/// Undirected edge between two adjacent hexagons, stored in canonical
/// (lexicographically sorted) order.
struct EdgeKey {
  HexCoord a;
  HexCoord b;

  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

inline EdgeKey make_edge(HexCoord u, HexCoord v) {
  if (!adjacent(u, v)) {
    throw std::invalid_argument("EdgeKey: hexagons are not adjacent");
  }
  if (v < u) std::swap(u, v);
  return EdgeKey{u, v};
}

struct HexCoordHash {
  std::size_t operator()(HexCoord h) const {
    const auto packed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(h.q)) << 32) |
                        static_cast<std::uint64_t>(static_cast<std::uint32_t>(h.r));
    return static_cast<std::size_t>(mix_u64(packed, 0x9e3779b97f4a7c15ull));
  }
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const {
    const HexCoordHash h;
    return static_cast<std::size_t>(mix_u64(h(e.a), h(e.b)));
  }
};

inline Eigen::Vector2d hex_center(HexCoord h, const HexGridConfig& cfg) {
  constexpr double sqrt3 = std::numbers::sqrt3;
  return cfg.origin + cfg.radius * Eigen::Vector2d(sqrt3 * (h.q + 0.5 * h.r),
                                                   1.5 * h.r);
}

namespace detail {

inline HexCoord axial_round(double qf, double rf) {
  const double sf = -qf - rf;
  double q = std::round(qf);
  double r = std::round(rf);
  double s = std::round(sf);
  const double dq = std::abs(q - qf);
  const double dr = std::abs(r - rf);
  const double ds = std::abs(s - sf);
  if (dq > dr && dq > ds) {
    q = -r - s;
  } else if (dr > ds) {
    r = -q - s;
  }
  return {static_cast<int>(q), static_cast<int>(r)};
}

// Boundary tie rule: queries are nudged by +1e-9*radius in both axes so that
// points on a cell boundary get a deterministic assignment.
inline Eigen::Vector2d tie_perturb(Eigen::Vector2d p, const HexGridConfig& cfg) {
  const double eps = 1e-9 * cfg.radius;
  return p + Eigen::Vector2d(eps, eps);
}

inline HexCoord hex_of_perturbed(const Eigen::Vector2d& p,
                                 const HexGridConfig& cfg) {
  constexpr double sqrt3 = std::numbers::sqrt3;
  const Eigen::Vector2d u = (p - cfg.origin) / cfg.radius;
  const double qf = (sqrt3 / 3.0) * u.x() - u.y() / 3.0;
  const double rf = (2.0 / 3.0) * u.y();
  return axial_round(qf, rf);
}

}  // namespace detail

/// Hexagon whose center is nearest to the point (cells are the Voronoi
/// regions of the center lattice).
inline HexCoord point_to_hex(const Eigen::Vector2d& p, const HexGridConfig& cfg) {
  if (!p.allFinite()) {
    throw std::invalid_argument("point_to_hex: non-finite point");
  }
  return detail::hex_of_perturbed(detail::tie_perturb(p, cfg), cfg);
}

/// One directed boundary crossing along a segment.
struct HexCrossing {
  HexCoord from;
  HexCoord to;

  EdgeKey edge() const { return make_edge(from, to); }
};

/// Ordered boundary crossings of the segment a->b. Walks the Voronoi cells of
/// the hexagon lattice: from the current cell, the exit is the nearest
/// forward intersection with one of the six neighbor bisectors.
inline void crossing_path_into(Eigen::Vector2d a, Eigen::Vector2d b,
                               const HexGridConfig& cfg,
                               std::vector<HexCrossing>& out) {
  out.clear();
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("crossings: non-finite endpoint");
  }
  a = detail::tie_perturb(a, cfg);
  b = detail::tie_perturb(b, cfg);
  HexCoord h = detail::hex_of_perturbed(a, cfg);
  const HexCoord hb = detail::hex_of_perturbed(b, cfg);
  if (h == hb) return;

  const Eigen::Vector2d d = b - a;
  const double seg_len = d.norm();
  const int max_steps = static_cast<int>(4.0 * seg_len / cfg.radius) + 16;
  double t_cur = 0.0;
  for (int iter = 0; iter < max_steps; ++iter) {
    const Eigen::Vector2d ch = hex_center(h, cfg);
    double best_t = std::numeric_limits<double>::infinity();
    int best_dir = -1;
    for (int i = 0; i < 6; ++i) {
      const HexCoord n = h + hex_directions()[i];
      const Eigen::Vector2d cn = hex_center(n, cfg);
      const Eigen::Vector2d u = cn - ch;          // bisector normal
      const double speed = d.dot(u);
      if (speed <= 0.0) continue;                  // moving away from n
      const Eigen::Vector2d mid = 0.5 * (ch + cn);
      const double t = (mid - a).dot(u) / speed;
      if (t < t_cur - 1e-12) continue;
      if (t < best_t) {
        best_t = t;
        best_dir = i;
      }
    }
    if (best_dir < 0 || best_t > 1.0) {
      // b is inside the current cell (possible only through roundoff at the
      // far endpoint); stop here.
      break;
    }
    const HexCoord next = h + hex_directions()[best_dir];
    out.push_back(HexCrossing{h, next});
    t_cur = std::max(t_cur, best_t);
    h = next;
    if (h == hb) break;
  }
}

inline std::vector<HexCrossing> crossing_path(const Eigen::Vector2d& a,
                                              const Eigen::Vector2d& b,
                                              const HexGridConfig& cfg) {
  std::vector<HexCrossing> out;
  crossing_path_into(a, b, cfg, out);
  return out;
}

/// Undirected edge sequence along a->b, in traversal order.
inline std::vector<EdgeKey> crossings(const Eigen::Vector2d& a,
                                      const Eigen::Vector2d& b,
                                      const HexGridConfig& cfg) {
  std::vector<EdgeKey> out;
  for (const HexCrossing& c : crossing_path(a, b, cfg)) {
    out.push_back(c.edge());
  }
  return out;
}

}  // namespace footcal
