#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "footcal/sensor_io.hpp"
#include "footcal/shoe.hpp"
#include "footcal/strapdown.hpp"

namespace footcal {

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

/// 9-state error covariance over (dp, dv, attitude error), attitude error in
/// the navigation frame.
struct ErrorState {
  Mat9 covariance = Mat9::Zero();
};

struct ZuptInsConfig {
  double zupt_noise_std = 0.01;       // m/s, sqrt of R_zupt diagonal
  bool smooth = false;                // fixed-interval smoothing pass
  double accel_process_noise = 0.3;   // m/s^2, velocity random walk drive
  double gyro_process_noise = 0.03;   // rad/s, attitude random walk drive
  double pos_process_noise = 1e-4;    // m, keeps P full rank for smoothing
  double init_pos_std = 1e-3;         // m
  double init_vel_std = 0.01;         // m/s
  double init_att_std = 0.01;         // rad
};

struct NavTrajectory {
  std::vector<NavState> states;
  ZvMask zv_mask;

  std::size_t size() const { return states.size(); }
};

/// Per-stride planar odometry: displacement in the previous stride's heading
/// frame, heading change, elapsed time.
struct OdometryStep {
  Eigen::Vector2d d = Eigen::Vector2d::Zero();  // m
  double dpsi = 0.0;                            // rad
  double dt = 0.0;                              // s
};

namespace detail {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

struct EskfSample {
  Mat9 transition = Mat9::Identity();  // error propagation k -> k+1
  Mat9 cov_pred = Mat9::Zero();
  Mat9 cov_filt = Mat9::Zero();
  Vec9 correction = Vec9::Zero();      // error estimate folded into the state
};

}  // namespace detail

/// Error-state Kalman filter around the strapdown integrator. Corrections
/// from zero-velocity pseudo-measurements are folded back into the nominal
/// state immediately; the covariance uses the Joseph update.
class ZuptEskf {
 public:
  ZuptEskf(NavState initial, const ZuptInsConfig& cfg)
      : cfg_(cfg), state_(std::move(initial)) {
    covariance_.setZero();
    covariance_.diagonal().segment<3>(0).setConstant(cfg.init_pos_std * cfg.init_pos_std);
    covariance_.diagonal().segment<3>(3).setConstant(cfg.init_vel_std * cfg.init_vel_std);
    covariance_.diagonal().segment<3>(6).setConstant(cfg.init_att_std * cfg.init_att_std);
  }

  /// Strapdown propagation plus covariance prediction. Returns the error
  /// transition used, for the smoother.
  Mat9 predict(const ImuRecord& rec, double dt, double gravity) {
    const Eigen::Vector3d f_nav = state_.att * rec.f;
    state_ = strapdown_step(state_, rec, dt, gravity);

    Mat9 F = Mat9::Identity();
    F.block<3, 3>(0, 3) = dt * Eigen::Matrix3d::Identity();
    F.block<3, 3>(3, 6) = -dt * detail::skew(f_nav);

    Mat9 Q = Mat9::Zero();
    Q.diagonal().segment<3>(0).setConstant(cfg_.pos_process_noise * cfg_.pos_process_noise * dt);
    Q.diagonal().segment<3>(3).setConstant(cfg_.accel_process_noise * cfg_.accel_process_noise * dt);
    Q.diagonal().segment<3>(6).setConstant(cfg_.gyro_process_noise * cfg_.gyro_process_noise * dt);

    covariance_ = F * covariance_ * F.transpose() + Q;
    symmetrize();
    return F;
  }

  /// Zero-velocity pseudo-measurement (v = 0). Returns the correction folded
  /// into the nominal state.
  Vec9 update_zero_velocity() {
    const double r = cfg_.zupt_noise_std * cfg_.zupt_noise_std;
    const Eigen::Matrix3d innov_cov =
        covariance_.block<3, 3>(3, 3) + r * Eigen::Matrix3d::Identity();
    const Eigen::Matrix<double, 9, 3> pv = covariance_.block<9, 3>(0, 3);
    const Eigen::Matrix<double, 9, 3> gain =
        pv * innov_cov.ldlt().solve(Eigen::Matrix3d::Identity());

    const Vec9 correction = gain * (-state_.v);
    apply_correction(correction);

    Mat9 joseph = Mat9::Identity();
    joseph.block<9, 3>(0, 3) -= gain;
    covariance_ = joseph * covariance_ * joseph.transpose() +
                  gain * (r * Eigen::Matrix3d::Identity()) * gain.transpose();
    symmetrize();
    return correction;
  }

  void apply_correction(const Vec9& dx) {
    state_.p += dx.segment<3>(0);
    state_.v += dx.segment<3>(3);
    state_.att = (detail::quat_exp(dx.segment<3>(6)) * state_.att).normalized();
  }

  bool finite() const {
    return state_.p.allFinite() && state_.v.allFinite() &&
           state_.att.coeffs().allFinite() && covariance_.allFinite();
  }

  const NavState& state() const { return state_; }
  NavState& state() { return state_; }
  const Mat9& covariance() const { return covariance_; }

 private:
  void symmetrize() {
    covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  }

  ZuptInsConfig cfg_;
  NavState state_;
  Mat9 covariance_;
};

/// Forward filter (optionally smoothed) over a full sequence: this realizes
/// the odometry transformation from raw inertial data and a detection
/// threshold.
inline NavTrajectory run_zupt_ins(const ImuSequence& seq, Threshold theta,
                                  const DetectorParams& det,
                                  const ZuptInsConfig& cfg = {}) {
  det.validate();
  const ZvMask mask = detect_zero_velocity(seq, theta, det);
  const std::size_t n = seq.size();

  // Attitude from the leading stationary span: at least one detector window,
  // at most one second of data.
  std::size_t init_len = 0;
  while (init_len < n && mask[init_len]) ++init_len;
  const std::size_t max_init = std::max<std::size_t>(
      static_cast<std::size_t>(det.window), static_cast<std::size_t>(seq.fs));
  init_len = std::clamp<std::size_t>(init_len, static_cast<std::size_t>(det.window), max_init);
  init_len = std::min(init_len, n);
  Eigen::Vector3d mean_f = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < init_len; ++k) mean_f += seq.records[k].f;
  mean_f /= static_cast<double>(init_len);

  NavState init;
  init.att = attitude_from_gravity(mean_f);
  init.t = seq.records.front().t;

  ZuptEskf filter(init, cfg);

  std::vector<detail::EskfSample> history;
  if (cfg.smooth) {
    history.resize(n);
    history[0].cov_pred = filter.covariance();
    history[0].cov_filt = filter.covariance();
  }

  NavTrajectory traj;
  traj.states.reserve(n);
  traj.states.push_back(filter.state());
  traj.zv_mask = mask;

  for (std::size_t k = 1; k < n; ++k) {
    const double dt = seq.records[k].t - seq.records[k - 1].t;
    const Mat9 F = filter.predict(seq.records[k - 1], dt, det.gravity);
    if (cfg.smooth) {
      history[k - 1].transition = F;
      history[k].cov_pred = filter.covariance();
    }
    Vec9 correction = Vec9::Zero();
    if (mask[k]) {
      correction = filter.update_zero_velocity();
    }
    if (cfg.smooth) {
      history[k].cov_filt = filter.covariance();
      history[k].correction = correction;
    }
    if (!filter.finite()) {
      throw std::runtime_error("run_zupt_ins: filter diverged at sample " +
                               std::to_string(k));
    }
    traj.states.push_back(filter.state());
  }

  if (cfg.smooth && n >= 2) {
    // Backward Rauch-Tung-Striebel pass on the error states. The forward pass
    // folded each correction into the nominal, so the smoothed increment at k
    // is C_k * (increment at k+1 + correction applied at k+1).
    Vec9 increment = Vec9::Zero();
    for (std::size_t k = n - 1; k-- > 0;) {
      const Vec9 downstream = increment + history[k + 1].correction;
      const Mat9 ct = history[k + 1].cov_pred.ldlt().solve(
          history[k].transition * history[k].cov_filt);
      increment = ct.transpose() * downstream;
      NavState& s = traj.states[k];
      s.p += increment.segment<3>(0);
      s.v += increment.segment<3>(3);
      s.att = (detail::quat_exp(increment.segment<3>(6)) * s.att).normalized();
    }
  }

  return traj;
}

// ---------------------------------------------------------------------------
// Stride odometry
// ---------------------------------------------------------------------------

inline constexpr double kMaxStrideDisplacement = 3.0;  // m

struct StancePhase {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::size_t midpoint() const { return (begin + end) / 2; }
};

inline std::vector<StancePhase> stance_phases(const ZvMask& mask) {
  std::vector<StancePhase> phases;
  std::size_t k = 0;
  while (k < mask.size()) {
    if (mask[k]) {
      StancePhase ph;
      ph.begin = k;
      while (k + 1 < mask.size() && mask[k + 1]) ++k;
      ph.end = k;
      phases.push_back(ph);
    }
    ++k;
  }
  return phases;
}

/// One odometry step per detected stride: planar displacement between
/// consecutive stance midpoints, expressed in the heading frame of the
/// earlier midpoint.
inline std::vector<OdometryStep> extract_odometry(const NavTrajectory& traj) {
  if (traj.zv_mask.size() != traj.states.size()) {
    throw std::invalid_argument("extract_odometry: mask/state length mismatch");
  }
  const std::vector<StancePhase> phases = stance_phases(traj.zv_mask);
  if (phases.size() < 2) {
    throw std::runtime_error("extract_odometry: no strides detected");
  }
  std::vector<OdometryStep> steps;
  steps.reserve(phases.size() - 1);
  for (std::size_t i = 1; i < phases.size(); ++i) {
    const NavState& a = traj.states[phases[i - 1].midpoint()];
    const NavState& b = traj.states[phases[i].midpoint()];
    const double psi_a = a.yaw();
    const Eigen::Vector2d delta = (b.p - a.p).head<2>();
    OdometryStep step;
    step.d = Eigen::Rotation2Dd(-psi_a) * delta;
    step.dpsi = wrap_angle(b.yaw() - psi_a);
    step.dt = b.t - a.t;
    if (!(step.dt > 0.0)) {
      throw std::runtime_error("extract_odometry: non-positive stride duration");
    }
    if (step.d.norm() >= kMaxStrideDisplacement) {
      throw std::runtime_error(
          "extract_odometry: stride " + std::to_string(i) +
          " displacement " + std::to_string(step.d.norm()) +
          " m exceeds single-stride bound");
    }
    steps.push_back(step);
  }
  return steps;
}

/// Chains odometry steps in the plane from (x0, y0, psi0). Returns one
/// (x, y, psi) row per pose, including the initial one.
inline std::vector<Eigen::Vector3d> compose_odometry(
    std::span<const OdometryStep> steps, double x0 = 0.0, double y0 = 0.0,
    double psi0 = 0.0) {
  std::vector<Eigen::Vector3d> poses;
  poses.reserve(steps.size() + 1);
  poses.emplace_back(x0, y0, psi0);
  for (const OdometryStep& s : steps) {
    const Eigen::Vector3d& prev = poses.back();
    const Eigen::Vector2d xy =
        prev.head<2>() + (Eigen::Rotation2Dd(prev.z()) * s.d).eval();
    poses.emplace_back(xy.x(), xy.y(), wrap_angle(prev.z() + s.dpsi));
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(const NavTrajectory& traj,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("trajectory CSV: cannot open " + path);
  }
  std::string buf = "t,px,py,pz,vx,vy,vz,yaw,zv\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const NavState& s = traj.states[k];
    const double vals[8] = {s.t,     s.p.x(), s.p.y(), s.p.z(),
                            s.v.x(), s.v.y(), s.v.z(), s.yaw()};
    for (double v : vals) {
      detail::append_double(buf, v);
      buf.push_back(',');
    }
    buf.push_back(traj.zv_mask[k] ? '1' : '0');
    buf.push_back('\n');
  }
  out << buf;
}

inline void write_odometry_csv(std::span<const OdometryStep> steps,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("odometry CSV: cannot open " + path);
  }
  std::string buf = "dt,dx,dy,dpsi\n";
  for (const OdometryStep& s : steps) {
    const double vals[4] = {s.dt, s.d.x(), s.d.y(), s.dpsi};
    for (int i = 0; i < 4; ++i) {
      if (i) buf.push_back(',');
      detail::append_double(buf, vals[i]);
    }
    buf.push_back('\n');
  }
  out << buf;
}

inline std::vector<OdometryStep> read_odometry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("odometry CSV: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != "dt,dx,dy,dpsi") {
    throw std::runtime_error("odometry CSV: bad header in " + path);
  }
  std::vector<OdometryStep> steps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    OdometryStep s;
    double* slots[4] = {&s.dt, &s.d.x(), &s.d.y(), &s.dpsi};
    std::string_view rest(line);
    for (int i = 0; i < 4; ++i) {
      const std::size_t comma = rest.find(',');
      const bool last_field = (i == 3);
      if (last_field != (comma == std::string_view::npos)) {
        throw std::runtime_error("odometry CSV: expected 4 fields on line " +
                                 std::to_string(line_no));
      }
      *slots[i] = detail::parse_double_field(
          last_field ? rest : rest.substr(0, comma), line_no);
      if (!last_field) rest.remove_prefix(comma + 1);
    }
    steps.push_back(s);
  }
  return steps;
}

}  // namespace footcal
