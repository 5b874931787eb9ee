#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "footcal/sensor_io.hpp"

namespace footcal {

inline constexpr double kDefaultGravity = 9.81;  // m/s^2

/// Navigation frame: x-y horizontal, z up, gravity (0, 0, -g).
inline Eigen::Vector3d gravity_vector(double g) { return {0.0, 0.0, -g}; }

/// Strapdown state. Attitude is kept as a unit quaternion (body->navigation);
/// normalizing it after every step keeps the rotation orthonormal.
struct NavState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();  // m
  Eigen::Vector3d v = Eigen::Vector3d::Zero();  // m/s
  Eigen::Quaterniond att = Eigen::Quaterniond::Identity();
  double t = 0.0;                               // s

  Eigen::Matrix3d rotation() const { return att.toRotationMatrix(); }

  double yaw() const {
    const Eigen::Matrix3d R = rotation();
    return std::atan2(R(1, 0), R(0, 0));
  }
};

namespace detail {

inline Eigen::Quaterniond quat_exp(const Eigen::Vector3d& theta) {
  const double angle = theta.norm();
  if (angle < 1e-12) {
    return Eigen::Quaterniond(1.0, 0.5 * theta.x(), 0.5 * theta.y(),
                              0.5 * theta.z())
        .normalized();
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, theta / angle));
}

}  // namespace detail

/// One integration step: attitude by the angular-rate increment, velocity by
/// the rotated specific force plus gravity, position by trapezoidal velocity
/// integration.
inline NavState strapdown_step(const NavState& s, const ImuRecord& rec,
                               double dt, double gravity = kDefaultGravity) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("strapdown_step: dt must be positive");
  }
  NavState out;
  out.att = (s.att * detail::quat_exp(rec.w * dt)).normalized();
  const Eigen::Vector3d accel = s.att * rec.f + gravity_vector(gravity);
  out.v = s.v + accel * dt;
  out.p = s.p + 0.5 * (s.v + out.v) * dt;
  out.t = s.t + dt;
  return out;
}

/// Roll/pitch leveling from the mean specific force over a stationary span;
/// heading is fixed to zero (it is unobservable from gravity alone).
inline Eigen::Quaterniond attitude_from_gravity(const Eigen::Vector3d& mean_f) {
  const double norm = mean_f.norm();
  if (norm < 1e-9) {
    throw std::invalid_argument("attitude_from_gravity: zero specific force");
  }
  const double roll = std::atan2(mean_f.y(), mean_f.z());
  const double pitch =
      std::atan2(-mean_f.x(), std::hypot(mean_f.y(), mean_f.z()));
  return Eigen::Quaterniond(Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));
}

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  if (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  return a;
}

}  // namespace footcal
