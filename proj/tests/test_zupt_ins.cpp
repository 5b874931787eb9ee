#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "footcal/gaitsim.hpp"
#include "footcal/shoe.hpp"
#include "footcal/strapdown.hpp"
#include "footcal/zupt_ins.hpp"
#include "test_util.hpp"

using namespace footcal;

namespace {

ImuSequence stationary_sequence(double duration, double fs, double noise_seed,
                                double noise_std = 0.0) {
  SplitMix64 rng(static_cast<std::uint64_t>(noise_seed));
  const std::size_t n = static_cast<std::size_t>(duration * fs);
  std::vector<ImuRecord> recs(n);
  for (std::size_t k = 0; k < n; ++k) {
    recs[k].t = static_cast<double>(k) / fs;
    recs[k].f = Eigen::Vector3d(0, 0, 9.81);
    recs[k].w = Eigen::Vector3d::Zero();
    if (noise_std > 0.0) {
      const NormalPair a = normal_pair(rng);
      const NormalPair b = normal_pair(rng);
      const NormalPair c = normal_pair(rng);
      recs[k].f += noise_std * Eigen::Vector3d(a.first, a.second, b.first);
      recs[k].w += 0.1 * noise_std * Eigen::Vector3d(b.second, c.first, c.second);
    }
  }
  return ImuSequence::from_records(std::move(recs));
}

std::vector<ImuRecord> stationary_window(int n, double g = 9.81) {
  std::vector<ImuRecord> w(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)].t = 0.01 * k;
    w[static_cast<std::size_t>(k)].f = Eigen::Vector3d(0, 0, g);
  }
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// SHOE statistic
// ---------------------------------------------------------------------------

TEST_CASE("shoe_statistic is zero for a perfectly stationary window") {
  const DetectorParams params;
  REQUIRE(shoe_statistic(stationary_window(params.window), params) == 0.0);
}

TEST_CASE("shoe_statistic equals one for a unit-normalized rate") {
  DetectorParams params;
  auto window = stationary_window(params.window, params.gravity);
  for (ImuRecord& rec : window) rec.w = Eigen::Vector3d(params.sigma_w, 0, 0);
  REQUIRE_THAT(shoe_statistic(window, params),
               Catch::Matchers::WithinAbs(1.0, 1e-14));
}

TEST_CASE("shoe_statistic matches a scalar-loop reference") {
  DetectorParams params;
  SplitMix64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ImuRecord> window(5);
    for (auto& rec : window) {
      const NormalPair a = normal_pair(rng);
      const NormalPair b = normal_pair(rng);
      const NormalPair c = normal_pair(rng);
      rec.f = Eigen::Vector3d(a.first, a.second, 9.0 + b.first);
      rec.w = Eigen::Vector3d(b.second, c.first, c.second);
    }
    // Reference: plain scalar loops in long double.
    long double mx = 0, my = 0, mz = 0;
    for (const auto& rec : window) {
      mx += rec.f.x();
      my += rec.f.y();
      mz += rec.f.z();
    }
    mx /= 5; my /= 5; mz /= 5;
    const long double norm = std::sqrt(mx * mx + my * my + mz * mz);
    const long double gx = params.gravity * mx / norm;
    const long double gy = params.gravity * my / norm;
    const long double gz = params.gravity * mz / norm;
    long double sum = 0;
    for (const auto& rec : window) {
      const long double dx = rec.f.x() - gx, dy = rec.f.y() - gy,
                        dz = rec.f.z() - gz;
      sum += (dx * dx + dy * dy + dz * dz) / (params.sigma_a * params.sigma_a);
      sum += (rec.w.x() * rec.w.x() + rec.w.y() * rec.w.y() +
              rec.w.z() * rec.w.z()) /
             (params.sigma_w * params.sigma_w);
    }
    const double expected = static_cast<double>(sum / 5);
    REQUIRE_THAT(shoe_statistic(window, params),
                 Catch::Matchers::WithinAbs(expected, 1e-12 * (1 + expected)));
  }
}

TEST_CASE("shoe_statistic rejects a free-fall window") {
  DetectorParams params;
  std::vector<ImuRecord> window(static_cast<std::size_t>(params.window));
  REQUIRE_THROWS_WITH(shoe_statistic(window, params),
                      Catch::Matchers::ContainsSubstring("zero-norm"));
}

// ---------------------------------------------------------------------------
// Zero-velocity detection
// ---------------------------------------------------------------------------

TEST_CASE("detect_zero_velocity on stationary data flags everything") {
  const ImuSequence seq = stationary_sequence(1.0, 100.0, 1);
  const ZvMask mask = detect_zero_velocity(seq, Threshold(1e-6), {});
  REQUIRE(mask.size() == seq.size());
  for (auto b : mask) REQUIRE(b == 1);
}

TEST_CASE("detect_zero_velocity with a vanishing threshold flags nothing") {
  const ImuSequence seq = stationary_sequence(1.0, 100.0, 2, 0.05);
  const ZvMask mask = detect_zero_velocity(seq, Threshold(1e-300), {});
  for (auto b : mask) REQUIRE(b == 0);
}

TEST_CASE("detect_zero_velocity is monotone in gamma") {
  const GroundTruth gt =
      synth_trajectory(TrajectorySpec::rectangle(1), GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(3));
  ZvMask prev;
  for (double gamma : {1e1, 1e2, 1e3, 1e4, 1e5}) {
    const ZvMask mask = detect_zero_velocity(seq, Threshold(gamma), {});
    if (!prev.empty()) {
      for (std::size_t k = 0; k < mask.size(); ++k) {
        if (prev[k]) REQUIRE(mask[k]);  // stationary set grows with gamma
      }
    }
    prev = mask;
  }
}

// ---------------------------------------------------------------------------
// Strapdown integration
// ---------------------------------------------------------------------------

TEST_CASE("strapdown_step holds still under stationary inputs") {
  NavState s;
  s.p = Eigen::Vector3d(1, 2, 3);
  ImuRecord rec;
  rec.f = Eigen::Vector3d(0, 0, 9.81);
  const NavState out = strapdown_step(s, rec, 0.01);
  REQUIRE(out.p == s.p);
  REQUIRE(out.v == s.v);
  REQUIRE_THAT(out.t, Catch::Matchers::WithinAbs(0.01, 1e-15));
}

TEST_CASE("strapdown_step pure yaw rotates the heading by pi") {
  NavState s;
  ImuRecord rec;
  rec.f = Eigen::Vector3d::Zero();
  const double dt = 0.5;
  rec.w = Eigen::Vector3d(0, 0, std::numbers::pi / dt);
  const NavState out = strapdown_step(s, rec, dt, 0.0);
  REQUIRE_THAT(std::abs(out.yaw()),
               Catch::Matchers::WithinAbs(std::numbers::pi, 1e-12));
}

TEST_CASE("attitude stays orthonormal over a million steps") {
  NavState s;
  SplitMix64 rng(83);
  ImuRecord rec;
  for (int k = 0; k < 1000000; ++k) {
    const NormalPair a = normal_pair(rng);
    const NormalPair b = normal_pair(rng);
    rec.w = Eigen::Vector3d(a.first, a.second, b.first);
    rec.f = Eigen::Vector3d(0, 0, 9.81 + b.second);
    s = strapdown_step(s, rec, 0.01);
  }
  const Eigen::Matrix3d R = s.rotation();
  REQUIRE((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  REQUIRE_THAT(R.determinant(), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("attitude_from_gravity levels roll and pitch") {
  // A tilted but level-recoverable orientation: body measures gravity along
  // a known direction.
  const Eigen::Quaterniond truth(
      Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(-0.1, Eigen::Vector3d::UnitX()));
  const Eigen::Vector3d f_body =
      truth.conjugate() * Eigen::Vector3d(0, 0, 9.81);
  const Eigen::Quaterniond recovered = attitude_from_gravity(f_body);
  REQUIRE(((recovered * f_body) - Eigen::Vector3d(0, 0, 9.81)).norm() < 1e-9);
}

// ---------------------------------------------------------------------------
// ZUPT-aided filter
// ---------------------------------------------------------------------------

TEST_CASE("run_zupt_ins pins a stationary sequence to the origin") {
  const ImuSequence seq = stationary_sequence(10.0, 100.0, 4, 0.02);
  const NavTrajectory traj = run_zupt_ins(seq, Threshold(1e4), {}, {});
  REQUIRE(traj.size() == seq.size());
  REQUIRE(traj.states.back().p.norm() < 1e-3);
}

TEST_CASE("with an all-true mask the filtered speed stays below 1 cm/s") {
  const ImuSequence seq = stationary_sequence(5.0, 100.0, 5, 0.05);
  const NavTrajectory traj = run_zupt_ins(seq, Threshold(1e8), {}, {});
  for (const NavState& s : traj.states) {
    REQUIRE(s.v.norm() < 0.01);
  }
}

TEST_CASE("a threshold below all statistics degenerates to pure strapdown") {
  const GroundTruth gt =
      synth_trajectory(TrajectorySpec::rectangle(1), GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(6));
  const NavTrajectory traj = run_zupt_ins(seq, Threshold(1e-300), {}, {});

  for (auto b : traj.zv_mask) REQUIRE(b == 0);
  // Replaying the strapdown with the same initialization must reproduce the
  // trajectory: no detections means no corrections.
  NavState s = traj.states.front();
  for (std::size_t k = 1; k < seq.size(); ++k) {
    s = strapdown_step(s, seq.records[k - 1],
                       seq.records[k].t - seq.records[k - 1].t);
    REQUIRE((s.p - traj.states[k].p).norm() < 1e-12);
  }
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
  const GroundTruth gt =
      synth_trajectory(TrajectorySpec::rectangle(1), GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(8));
  const ZvMask mask = detect_zero_velocity(seq, Threshold(1e4), {});

  NavState init;
  init.att = attitude_from_gravity(seq.records[0].f);
  ZuptEskf filter(init, {});
  auto check = [&]() {
    const Mat9& P = filter.covariance();
    REQUIRE((P - P.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat9> eig(P);
    REQUIRE(eig.eigenvalues().minCoeff() > -1e-12);
  };
  for (std::size_t k = 1; k < seq.size(); ++k) {
    filter.predict(seq.records[k - 1], 0.01, 9.81);
    check();
    if (mask[k]) {
      filter.update_zero_velocity();
      check();
    }
  }
}

TEST_CASE("filter divergence reports the sample index") {
  std::vector<ImuRecord> recs(200);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    recs[k].t = 0.01 * static_cast<double>(k);
    recs[k].f = Eigen::Vector3d(0, 0, 9.81);
  }
  for (std::size_t k = 100; k < recs.size(); ++k) {
    recs[k].f = Eigen::Vector3d(1e200, 0, 0);  // forces covariance overflow
  }
  const ImuSequence seq = ImuSequence::from_records(std::move(recs));
  REQUIRE_THROWS_WITH(run_zupt_ins(seq, Threshold(1.0), {}, {}),
                      Catch::Matchers::ContainsSubstring("sample"));
}

TEST_CASE("smoothing leaves the endpoint and improves the interior") {
  const GroundTruth gt = synth_trajectory(TrajectorySpec::rectangle(2),
                                          GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(12));

  ZuptInsConfig smooth_cfg;
  smooth_cfg.smooth = true;
  const NavTrajectory filtered = run_zupt_ins(seq, Threshold(1e4), {}, {});
  const NavTrajectory smoothed = run_zupt_ins(seq, Threshold(1e4), {}, smooth_cfg);

  REQUIRE((filtered.states.back().p - smoothed.states.back().p).norm() < 1e-9);

  // Mean horizontal position error against ground truth must not get worse.
  auto mean_error = [&](const NavTrajectory& traj) {
    double sum = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      sum += (traj.states[k].p.head<2>() - gt.pos[k].head<2>()).norm();
    }
    return sum / static_cast<double>(traj.size());
  };
  REQUIRE(mean_error(smoothed) <= mean_error(filtered) * 1.05);
}

// ---------------------------------------------------------------------------
// Odometry extraction
// ---------------------------------------------------------------------------

namespace {

NavTrajectory two_stance_trajectory(const Eigen::Vector2d& displacement,
                                    double yaw_a, double yaw_b) {
  NavTrajectory traj;
  for (int k = 0; k < 20; ++k) {
    NavState s;
    s.t = 0.1 * k;
    const bool second = k >= 10;
    s.p = second ? Eigen::Vector3d(displacement.x(), displacement.y(), 0)
                 : Eigen::Vector3d::Zero();
    s.att = Eigen::Quaterniond(
        Eigen::AngleAxisd(second ? yaw_b : yaw_a, Eigen::Vector3d::UnitZ()));
    traj.states.push_back(s);
    traj.zv_mask.push_back(k < 5 || (k >= 10 && k < 15) ? 1 : 0);
  }
  return traj;
}

}  // namespace

TEST_CASE("extract_odometry produces one step between two stances") {
  const NavTrajectory traj = two_stance_trajectory({0.7, 0.0}, 0.0, 0.0);
  const auto steps = extract_odometry(traj);
  REQUIRE(steps.size() == 1);
  REQUIRE_THAT(steps[0].d.x(), Catch::Matchers::WithinAbs(0.7, 1e-15));
  REQUIRE_THAT(steps[0].d.y(), Catch::Matchers::WithinAbs(0.0, 1e-15));
  REQUIRE(steps[0].dpsi == 0.0);
  REQUIRE(steps[0].dt > 0.0);
}

TEST_CASE("extract_odometry expresses displacement in the stride frame") {
  // Heading pi/2: a world displacement (0, 0.7) is (0.7, 0) in stride frame.
  const NavTrajectory traj =
      two_stance_trajectory({0.0, 0.7}, std::numbers::pi / 2,
                            std::numbers::pi / 2);
  const auto steps = extract_odometry(traj);
  REQUIRE(steps.size() == 1);
  REQUIRE_THAT(steps[0].d.x(), Catch::Matchers::WithinAbs(0.7, 1e-12));
  REQUIRE_THAT(steps[0].d.y(), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("extract_odometry requires two stance phases") {
  NavTrajectory traj = two_stance_trajectory({0.7, 0.0}, 0.0, 0.0);
  std::fill(traj.zv_mask.begin(), traj.zv_mask.end(), 0);
  REQUIRE_THROWS_WITH(extract_odometry(traj),
                      Catch::Matchers::ContainsSubstring("no strides"));
}

TEST_CASE("extract_odometry rejects implausible stride displacements") {
  const NavTrajectory traj = two_stance_trajectory({5.0, 0.0}, 0.0, 0.0);
  REQUIRE_THROWS_WITH(extract_odometry(traj),
                      Catch::Matchers::ContainsSubstring("single-stride"));
}

TEST_CASE("straight-line strides carry near-zero heading changes") {
  TrajectorySpec spec;
  spec.waypoints = {{0.0, 0.0}, {20.0, 0.0}};
  const GroundTruth gt = synth_trajectory(spec, GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(19));
  const auto steps = extract_odometry(run_zupt_ins(seq, Threshold(100.0), {}, {}));
  REQUIRE(steps.size() >= 10);
  for (const OdometryStep& s : steps) {
    REQUIRE(std::abs(s.dpsi) < 0.1);
  }
}

TEST_CASE("composing odometry reproduces stance midpoints exactly") {
  const GroundTruth gt = synth_trajectory(TrajectorySpec::rectangle(2),
                                          GaitProfile::walk(), 100.0);
  const ImuSequence seq = imu_from_trajectory(gt, NoiseSpec::consumer(17));
  const NavTrajectory traj = run_zupt_ins(seq, Threshold(1e4), {}, {});
  const auto steps = extract_odometry(traj);
  const auto phases = stance_phases(traj.zv_mask);
  REQUIRE(steps.size() + 1 == phases.size());

  const NavState& first = traj.states[phases[0].midpoint()];
  const auto poses =
      compose_odometry(steps, first.p.x(), first.p.y(), first.yaw());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const NavState& mid = traj.states[phases[i].midpoint()];
    REQUIRE((poses[i].head<2>() - mid.p.head<2>()).norm() < 1e-9);
  }
}
