#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "footcal/eval.hpp"
#include "test_util.hpp"

using namespace footcal;

namespace {

NavTrajectory line_trajectory(const Eigen::Vector2d& start,
                              const Eigen::Vector2d& end, int n = 50) {
  NavTrajectory traj;
  for (int k = 0; k < n; ++k) {
    NavState s;
    const double f = static_cast<double>(k) / (n - 1);
    s.t = 0.01 * k;
    s.p.head<2>() = start + f * (end - start);
    traj.states.push_back(s);
    traj.zv_mask.push_back(0);
  }
  return traj;
}

}  // namespace

TEST_CASE("loop_closure_error basics") {
  REQUIRE(loop_closure_error(line_trajectory({1, 2}, {1, 2})) == 0.0);
  REQUIRE_THAT(loop_closure_error(line_trajectory({0, 0}, {3, 0})),
               Catch::Matchers::WithinAbs(3.0, 1e-15));
  // An injected 0.5 m offset comes back exactly.
  NavTrajectory traj = line_trajectory({0, 0}, {0, 0});
  traj.states.back().p += Eigen::Vector3d(0.3, 0.4, 0.0);
  REQUIRE_THAT(loop_closure_error(traj), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("loop closure ignores the vertical component") {
  NavTrajectory traj = line_trajectory({0, 0}, {0, 0});
  traj.states.back().p.z() = 5.0;
  REQUIRE(loop_closure_error(traj) == 0.0);
}

TEST_CASE("rmse closed forms") {
  const std::vector<double> pair = {3.0, 4.0};
  REQUIRE_THAT(rmse(pair), Catch::Matchers::WithinRel(std::sqrt(12.5), 1e-15));
  const std::vector<double> constant(7, 2.5);
  REQUIRE_THAT(rmse(constant), Catch::Matchers::WithinRel(2.5, 1e-15));
  REQUIRE_THROWS_AS(rmse(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("rmse matches extended-precision recomputation") {
  SplitMix64 rng(3);
  std::vector<double> errors(500);
  long double sum_sq = 0.0L;
  for (double& e : errors) {
    e = 10.0 * uniform01(rng);
    sum_sq += static_cast<long double>(e) * e;
  }
  const double expected = static_cast<double>(
      std::sqrt(sum_sq / static_cast<long double>(errors.size())));
  REQUIRE_THAT(rmse(errors), Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("rmse dominates the mean absolute error") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> errors(1 + rng() % 40);
    double mean_abs = 0.0;
    for (double& e : errors) {
      e = 5.0 * uniform01(rng);
      mean_abs += e;
    }
    mean_abs /= static_cast<double>(errors.size());
    REQUIRE(rmse(errors) >= mean_abs - 1e-12);
  }
}

TEST_CASE("ecdf closed forms") {
  const EcdfCurve single = ecdf({1.0});
  REQUIRE(single.values == std::vector<double>{1.0});
  REQUIRE(single.probs == std::vector<double>{1.0});

  const EcdfCurve four = ecdf({3.0, 1.0, 4.0, 2.0});
  REQUIRE(four.values == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  REQUIRE(four.probs == std::vector<double>{0.25, 0.5, 0.75, 1.0});
  REQUIRE_THROWS_AS(ecdf({}), std::invalid_argument);
}

TEST_CASE("ecdf is invariant to input permutation and well formed") {
  SplitMix64 rng(7);
  std::vector<double> errors(200);
  for (double& e : errors) e = uniform01(rng);
  std::vector<double> shuffled = errors;
  for (std::size_t k = shuffled.size(); k > 1; --k) {
    std::swap(shuffled[k - 1], shuffled[rng() % k]);
  }
  const EcdfCurve a = ecdf(errors);
  const EcdfCurve b = ecdf(shuffled);
  REQUIRE(a.values == b.values);
  REQUIRE(a.probs == b.probs);
  REQUIRE(std::is_sorted(a.values.begin(), a.values.end()));
  REQUIRE(std::is_sorted(a.probs.begin(), a.probs.end()));
  REQUIRE(a.probs.back() == 1.0);
}

TEST_CASE("merged_trajectory_error sums closure vectors") {
  const std::vector<Eigen::Vector2d> cancel = {{1, 0}, {-1, 0}};
  REQUIRE(merged_trajectory_error(cancel) == 0.0);
  const std::vector<Eigen::Vector2d> pythagoras = {{3, 0}, {0, 4}};
  REQUIRE_THAT(merged_trajectory_error(pythagoras),
               Catch::Matchers::WithinAbs(5.0, 1e-15));
  REQUIRE_THROWS_AS(merged_trajectory_error(std::vector<Eigen::Vector2d>{}),
                    std::invalid_argument);
}

TEST_CASE("merged error obeys the triangle inequality") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::Vector2d> vectors(1 + rng() % 20);
    double sum_norm = 0.0;
    for (Eigen::Vector2d& v : vectors) {
      v = Eigen::Vector2d(uniform01(rng) - 0.5, uniform01(rng) - 0.5);
      sum_norm += v.norm();
    }
    REQUIRE(merged_trajectory_error(vectors) <= sum_norm + 1e-12);
  }
}
