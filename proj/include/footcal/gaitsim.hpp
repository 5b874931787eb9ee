#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <json.hpp>

#include "footcal/rng.hpp"
#include "footcal/sensor_io.hpp"
#include "footcal/strapdown.hpp"

namespace footcal {

struct GaitProfile {
  double speed_kmh = 4.5;       // average ground speed
  double stride_length = 1.3;   // m per full gait cycle of one foot
  double stance_fraction = 0.55;
  double foot_lift = 0.05;      // m, swing apex
  double pitch_amplitude = 0.8;  // rad, sagittal foot rotation during swing
  double variability = 0.1;      // stride-to-stride spread of timing/rotation
  double stance_loading = 0.3;   // scales sensor vibration while loaded
  double lateral_sway = 0.035;   // m, sideways bow of the swing path
  std::uint64_t gait_seed = 0;   // selects the stride-variability realization

  void validate() const {
    if (!(speed_kmh > 0.0) || !(stride_length > 0.0) || !(foot_lift > 0.0) ||
        !(stance_fraction > 0.0) || !(stance_fraction < 1.0) ||
        pitch_amplitude < 0.0 || variability < 0.0 || variability > 0.3 ||
        stance_loading < 0.0 || lateral_sway < 0.0) {
      throw std::invalid_argument("GaitProfile: invalid parameters");
    }
  }

  static GaitProfile walk() {
    return {4.5, 1.3, 0.55, 0.05, 0.37, 0.1, 0.3, 0.035, 0};
  }
  static GaitProfile fast_walk() {
    return {6.5, 1.5, 0.45, 0.08, 0.9, 0.1, 1.2, 0.045, 0};
  }
  static GaitProfile jog() {
    return {8.0, 1.7, 0.35, 0.12, 1.1, 0.1, 14.0, 0.04, 0};
  }
};

struct TrajectorySpec {
  std::vector<Eigen::Vector2d> waypoints;  // visited in order
  int laps = 1;                            // requires a closed loop when > 1

  static TrajectorySpec rectangle(double width, double height, int laps) {
    TrajectorySpec spec;
    spec.waypoints = {{0.0, 0.0}, {width, 0.0},  {width, height},
                      {0.0, height}, {0.0, 0.0}};
    spec.laps = laps;
    return spec;
  }

  /// The closed-loop rectangle scenario used throughout the test corpus.
  static TrajectorySpec rectangle(int laps) { return rectangle(2.6, 3.2, laps); }
};

struct NoiseSpec {
  double accel_std = 0.0;   // m/s^2, white
  double gyro_std = 0.0;    // rad/s, white
  double accel_bias = 0.0;  // m/s^2, constant on the body z axis
  double gyro_bias = 0.0;   // rad/s, constant on the body z axis
  // Touchdown/liftoff transients: the decaying ringing a foot-mounted IMU
  // picks up at heel strike and push-off. Sensor-level only, the true pose
  // stays stationary.
  double impact_accel = 0.0;  // m/s^2, initial ringing amplitude
  double impact_gyro = 0.0;   // rad/s
  double impact_decay = 0.012;  // s, envelope time constant
  double impact_freq = 40.0;   // Hz
  // Loading vibration while the foot bears weight, scaled per gait by
  // GaitProfile::stance_loading.
  double tremor_accel = 0.0;  // m/s^2
  double tremor_gyro = 0.0;   // rad/s
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec consumer(std::uint64_t seed = 0) {
    NoiseSpec n;
    n.accel_std = 0.05;
    n.gyro_std = 0.005;
    n.gyro_bias = 0.001;
    n.impact_accel = 30.0;
    n.impact_gyro = 3.0;
    n.tremor_accel = 0.5;
    n.tremor_gyro = 0.05;
    n.seed = seed;
    return n;
  }
};

/// True foot trace aligned sample-for-sample with the generated IMU data.
struct GroundTruth {
  std::vector<double> t;
  std::vector<Eigen::Vector3d> pos;  // m
  std::vector<double> yaw;           // rad
  std::vector<double> pitch;         // rad, sagittal foot rotation
  ZvMask stance;
  double fs = 0.0;
  double tremor_scale = 0.0;  // per-gait multiplier for loading vibration

  std::size_t size() const { return t.size(); }

  // pitch may be left empty for a level foot
  Eigen::Quaterniond attitude(std::size_t k) const {
    const double p = pitch.empty() ? 0.0 : pitch[k];
    return Eigen::Quaterniond(
        Eigen::AngleAxisd(yaw[k], Eigen::Vector3d::UnitZ()) *
        Eigen::AngleAxisd(p, Eigen::Vector3d::UnitY()));
  }
};

inline constexpr double kLeadInTime = 2.0;   // s of stance before the walk
inline constexpr double kLeadOutTime = 1.0;  // s of stance after the walk

namespace detail {

// Swing timing profile: zero velocity and acceleration at both ends.
inline double cycloid_profile(double tau) {
  return tau - std::sin(2.0 * std::numbers::pi * tau) / (2.0 * std::numbers::pi);
}

inline double lift_profile(double tau) {
  const double half_wave = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * tau));
  return half_wave * half_wave;
}

// Sagittal rotation profile: zero angle and zero rate at both ends, one
// dorsiflexion/plantarflexion wave in between.
inline double pitch_profile(double tau) {
  const double theta = 2.0 * std::numbers::pi * tau;
  return std::sin(theta) * 0.5 * (1.0 - std::cos(theta));
}

// Per-stride multiplicative jitter in [1-v, 1+v], a pure function of the
// profile's variability seed and the stride index.
inline double stride_jitter(std::uint64_t seed, std::uint64_t stride,
                            std::uint64_t channel, double v) {
  const std::uint64_t bits = mix_u64(mix_u64(seed, stride), channel);
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return 1.0 + v * (2.0 * u - 1.0);
}

struct GaitPlan {
  std::vector<Eigen::Vector2d> footfalls;
  std::vector<double> headings;     // heading held during stance at footfall j
  std::vector<double> swing_start;  // per stride
  std::vector<double> swing_end;
  std::vector<double> pitch_scale;  // per stride
  std::vector<double> sway_scale;   // per stride
  double total_time = 0.0;
};

inline GaitPlan plan_gait(const TrajectorySpec& spec, const GaitProfile& gait) {
  gait.validate();
  if (spec.waypoints.size() < 2) {
    throw std::invalid_argument("TrajectorySpec: need at least 2 waypoints");
  }
  if (spec.laps < 1) {
    throw std::invalid_argument("TrajectorySpec: laps must be >= 1");
  }
  const bool closed =
      (spec.waypoints.front() - spec.waypoints.back()).norm() < 1e-12;
  if (spec.laps > 1 && !closed) {
    throw std::invalid_argument("TrajectorySpec: laps require a closed loop");
  }

  GaitPlan plan;
  plan.footfalls.push_back(spec.waypoints.front());
  for (int lap = 0; lap < spec.laps; ++lap) {
    for (std::size_t i = 1; i < spec.waypoints.size(); ++i) {
      const Eigen::Vector2d a = spec.waypoints[i - 1];
      const Eigen::Vector2d b = spec.waypoints[i];
      const double len = (b - a).norm();
      if (len < gait.stride_length) {
        throw std::invalid_argument(
            "TrajectorySpec: waypoints closer than one stride");
      }
      const int n = std::max(1L, std::lround(len / gait.stride_length));
      for (int j = 1; j <= n; ++j) {
        plan.footfalls.push_back(a + (static_cast<double>(j) / n) * (b - a));
      }
    }
  }

  const std::size_t m = plan.footfalls.size();
  plan.headings.resize(m);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const Eigen::Vector2d dir = plan.footfalls[j + 1] - plan.footfalls[j];
    plan.headings[j] = std::atan2(dir.y(), dir.x());
  }
  plan.headings[m - 1] = plan.headings[m - 2];

  const double speed = gait.speed_kmh / 3.6;
  double t = kLeadInTime;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double stride = (plan.footfalls[j + 1] - plan.footfalls[j]).norm();
    const double cycle =
        stride / speed * stride_jitter(gait.gait_seed, j, 1, gait.variability);
    const double split = std::clamp(
        gait.stance_fraction * stride_jitter(gait.gait_seed, j, 2, gait.variability),
        0.05, 0.95);
    const double swing = (1.0 - split) * cycle;
    plan.swing_start.push_back(t);
    plan.swing_end.push_back(t + swing);
    plan.pitch_scale.push_back(
        gait.pitch_amplitude * stride_jitter(gait.gait_seed, j, 3, gait.variability));
    plan.sway_scale.push_back(
        gait.lateral_sway * stride_jitter(gait.gait_seed, j, 4, gait.variability));
    t += cycle;
  }
  plan.total_time = t + kLeadOutTime;
  return plan;
}

}  // namespace detail

/// Parametric gait over a waypoint trajectory: exactly stationary stance
/// phases at footfalls, smooth cycloidal swings between them.
inline GroundTruth synth_trajectory(const TrajectorySpec& spec,
                                    const GaitProfile& gait, double fs) {
  if (!(fs > 0.0)) {
    throw std::invalid_argument("synth_trajectory: fs must be positive");
  }
  const detail::GaitPlan plan = detail::plan_gait(spec, gait);
  const std::size_t n =
      static_cast<std::size_t>(std::ceil(plan.total_time * fs)) + 1;

  GroundTruth gt;
  gt.fs = fs;
  gt.tremor_scale = gait.stance_loading;
  gt.t.reserve(n);
  gt.pos.reserve(n);
  gt.yaw.reserve(n);
  gt.pitch.reserve(n);
  gt.stance.reserve(n);

  std::size_t stride = 0;  // index of the first swing not yet finished
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fs;
    while (stride < plan.swing_end.size() && t > plan.swing_end[stride]) {
      ++stride;
    }
    Eigen::Vector2d xy;
    double z = 0.0;
    double psi = 0.0;
    double pitch = 0.0;
    bool stance = true;
    if (stride >= plan.swing_start.size()) {
      xy = plan.footfalls.back();
      psi = plan.headings.back();
    } else if (t <= plan.swing_start[stride]) {
      xy = plan.footfalls[stride];
      psi = plan.headings[stride];
    } else {
      const double tau = (t - plan.swing_start[stride]) /
                         (plan.swing_end[stride] - plan.swing_start[stride]);
      const double s = detail::cycloid_profile(tau);
      const Eigen::Vector2d a = plan.footfalls[stride];
      const Eigen::Vector2d b = plan.footfalls[stride + 1];
      xy = a + s * (b - a);
      const double chord = (b - a).norm();
      if (chord > 0.0) {
        // Sideways bow of the swing path; zero offset and rate at both ends.
        const Eigen::Vector2d normal(-(b - a).y() / chord, (b - a).x() / chord);
        xy += plan.sway_scale[stride] * detail::pitch_profile(tau) * normal;
      }
      z = gait.foot_lift * detail::lift_profile(tau);
      const double psi_a = plan.headings[stride];
      const double psi_b = plan.headings[stride + 1];
      psi = psi_a + s * wrap_angle(psi_b - psi_a);
      pitch = plan.pitch_scale[stride] * detail::pitch_profile(tau);
      stance = !(tau > 0.0 && tau < 1.0);
    }
    gt.t.push_back(t);
    gt.pos.emplace_back(xy.x(), xy.y(), z);
    gt.yaw.push_back(wrap_angle(psi));
    gt.pitch.push_back(pitch);
    gt.stance.push_back(stance ? 1 : 0);
  }
  return gt;
}

/// Inverse strapdown: body-frame specific force from central-difference
/// acceleration, angular rate from attitude increments, then noise and bias.
/// Replaying the noise-free output through strapdown_step recovers the true
/// positions.
inline ImuSequence imu_from_trajectory(const GroundTruth& gt,
                                       const NoiseSpec& noise,
                                       double gravity = kDefaultGravity) {
  if (gt.fs < 50.0) {
    throw std::invalid_argument("imu_from_trajectory: fs must be >= 50 Hz");
  }
  const std::size_t n = gt.size();
  if (n < 2) {
    throw std::invalid_argument("imu_from_trajectory: trajectory too short");
  }
  const double dt = 1.0 / gt.fs;
  const Eigen::Vector3d g_vec = gravity_vector(gravity);

  std::vector<ImuRecord> recs(n);
  SplitMix64 rng = substream(noise.seed, 0x1a5u, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector3d prev = (k == 0) ? gt.pos[0] : gt.pos[k - 1];
    const Eigen::Vector3d next = (k + 1 == n) ? gt.pos[n - 1] : gt.pos[k + 1];
    const Eigen::Vector3d accel = (next - 2.0 * gt.pos[k] + prev) / (dt * dt);

    const Eigen::Quaterniond att = gt.attitude(k);
    ImuRecord& rec = recs[k];
    rec.t = gt.t[k];
    rec.f = att.conjugate() * (accel - g_vec);
    if (k + 1 == n) {
      rec.w = Eigen::Vector3d::Zero();
    } else {
      Eigen::Quaterniond increment = att.conjugate() * gt.attitude(k + 1);
      if (increment.w() < 0.0) increment.coeffs() = -increment.coeffs();
      const Eigen::AngleAxisd aa(increment.normalized());
      rec.w = (aa.angle() / dt) * aa.axis();
    }

    rec.f.z() += noise.accel_bias;
    rec.w.z() += noise.gyro_bias;
    if (noise.accel_std > 0.0 || noise.gyro_std > 0.0) {
      const NormalPair na = normal_pair(rng);
      const NormalPair nb = normal_pair(rng);
      const NormalPair nc = normal_pair(rng);
      rec.f += noise.accel_std * Eigen::Vector3d(na.first, na.second, nb.first);
      rec.w += noise.gyro_std * Eigen::Vector3d(nb.second, nc.first, nc.second);
    }
    const double tremor_a = noise.tremor_accel * gt.tremor_scale;
    const double tremor_g = noise.tremor_gyro * gt.tremor_scale;
    if (gt.stance[k] && (tremor_a > 0.0 || tremor_g > 0.0)) {
      const NormalPair ta = normal_pair(rng);
      const NormalPair tb = normal_pair(rng);
      const NormalPair tc = normal_pair(rng);
      rec.f += tremor_a * Eigen::Vector3d(ta.first, ta.second, tb.first);
      rec.w += tremor_g * Eigen::Vector3d(tb.second, tc.first, tc.second);
    }
  }

  if (noise.impact_accel > 0.0 || noise.impact_gyro > 0.0) {
    std::size_t strike = 0;
    for (std::size_t k0 = 1; k0 < n; ++k0) {
      const bool touchdown = gt.stance[k0] && !gt.stance[k0 - 1];
      const bool liftoff = !gt.stance[k0] && gt.stance[k0 - 1];
      if (!touchdown && !liftoff) continue;
      SplitMix64 strike_rng = substream(noise.seed, 0x1b2u, strike++);
      const double scale =
          (touchdown ? 1.0 : 0.5) * (0.7 + 0.6 * uniform01(strike_rng));
      const double phase0 = 2.0 * std::numbers::pi * uniform01(strike_rng);
      const NormalPair da = normal_pair(strike_rng);
      const NormalPair db = normal_pair(strike_rng);
      const NormalPair dc = normal_pair(strike_rng);
      const Eigen::Vector3d dir_a =
          Eigen::Vector3d(da.first, da.second, db.first).normalized();
      const Eigen::Vector3d dir_w =
          Eigen::Vector3d(db.second, dc.first, dc.second).normalized();
      const std::size_t span =
          static_cast<std::size_t>(6.0 * noise.impact_decay * gt.fs) + 1;
      for (std::size_t k = k0; k < std::min(n, k0 + span); ++k) {
        const double elapsed = (static_cast<double>(k - k0)) * dt;
        const double envelope = scale * std::exp(-elapsed / noise.impact_decay);
        const double wave =
            std::cos(2.0 * std::numbers::pi * noise.impact_freq * elapsed + phase0);
        recs[k].f += noise.impact_accel * envelope * wave * dir_a;
        recs[k].w += noise.impact_gyro * envelope * wave * dir_w;
      }
    }
  }
  return ImuSequence::from_records(std::move(recs));
}

// ---------------------------------------------------------------------------
// Scenario files and ground-truth export
// ---------------------------------------------------------------------------

struct Scenario {
  TrajectorySpec trajectory;
  GaitProfile gait;
  NoiseSpec noise;
  double fs = 100.0;
};

inline GaitProfile gait_preset(const std::string& name) {
  if (name == "walk") return GaitProfile::walk();
  if (name == "fast-walk") return GaitProfile::fast_walk();
  if (name == "jog") return GaitProfile::jog();
  throw std::runtime_error("unknown gait preset '" + name + "'");
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("scenario: cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  Scenario sc;

  const auto& traj = j.at("trajectory");
  if (traj.contains("rectangle")) {
    const auto& r = traj.at("rectangle");
    sc.trajectory = TrajectorySpec::rectangle(r.at("width").get<double>(),
                                              r.at("height").get<double>(),
                                              r.value("laps", 1));
  } else {
    for (const auto& wp : traj.at("waypoints")) {
      sc.trajectory.waypoints.emplace_back(wp.at(0).get<double>(),
                                           wp.at(1).get<double>());
    }
    sc.trajectory.laps = traj.value("laps", 1);
  }

  const auto& gait = j.at("gait");
  if (gait.is_string()) {
    sc.gait = gait_preset(gait.get<std::string>());
  } else {
    sc.gait.speed_kmh = gait.at("speed_kmh").get<double>();
    sc.gait.stride_length = gait.at("stride_length").get<double>();
    sc.gait.stance_fraction = gait.at("stance_fraction").get<double>();
    sc.gait.foot_lift = gait.at("foot_lift").get<double>();
    sc.gait.pitch_amplitude = gait.value("pitch_amplitude", sc.gait.pitch_amplitude);
    sc.gait.variability = gait.value("variability", sc.gait.variability);
    sc.gait.stance_loading = gait.value("stance_loading", sc.gait.stance_loading);
    sc.gait.lateral_sway = gait.value("lateral_sway", sc.gait.lateral_sway);
  }

  const auto& noise = j.at("noise");
  if (noise.is_string()) {
    const std::string name = noise.get<std::string>();
    if (name == "consumer") {
      sc.noise = NoiseSpec::consumer();
    } else if (name == "none") {
      sc.noise = NoiseSpec::none();
    } else {
      throw std::runtime_error("unknown noise preset '" + name + "'");
    }
  } else {
    sc.noise.accel_std = noise.value("accel_std", 0.0);
    sc.noise.gyro_std = noise.value("gyro_std", 0.0);
    sc.noise.accel_bias = noise.value("accel_bias", 0.0);
    sc.noise.gyro_bias = noise.value("gyro_bias", 0.0);
    sc.noise.impact_accel = noise.value("impact_accel", 0.0);
    sc.noise.impact_gyro = noise.value("impact_gyro", 0.0);
    sc.noise.impact_decay = noise.value("impact_decay", 0.012);
    sc.noise.impact_freq = noise.value("impact_freq", 40.0);
    sc.noise.tremor_accel = noise.value("tremor_accel", 0.0);
    sc.noise.tremor_gyro = noise.value("tremor_gyro", 0.0);
  }

  sc.fs = j.value("fs", 100.0);
  sc.noise.seed = j.value("seed", std::uint64_t{0});
  sc.gait.gait_seed = sc.noise.seed;
  return sc;
}

inline void write_ground_truth_csv(const GroundTruth& gt,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("ground-truth CSV: cannot open " + path);
  }
  std::string buf = "t,x,y,z,yaw,stance\n";
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const double vals[5] = {gt.t[k], gt.pos[k].x(), gt.pos[k].y(),
                            gt.pos[k].z(), gt.yaw[k]};
    for (double v : vals) {
      detail::append_double(buf, v);
      buf.push_back(',');
    }
    buf.push_back(gt.stance[k] ? '1' : '0');
    buf.push_back('\n');
  }
  out << buf;
}

}  // namespace footcal
