#pragma once

// Ground-truth trajectories.  A trajectory is the forward-Euler chain of its
// stored body-frame controls: replaying (v, w) from the first pose reproduces
// every stored pose bit for bit.  This makes the discrete motion model exact
// on the ground truth and keeps discretization error out of filter tests.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rekf/se2.hpp"
#include "rekf/spline.hpp"

namespace rekf {

struct TrajectorySample {
  Pose pose;
  Eigen::Vector2d v{0.0, 0.0};  // body-frame velocity driving this step, m/s
  double w = 0.0;               // angular velocity driving this step, rad/s
};

// One forward-Euler step of the planar motion model.
inline Pose euler_step(const Pose& x, const Eigen::Vector2d& v, double w, double dt) {
  return Pose(x.p + dt * (rot(x.theta) * v), x.theta + dt * w);
}

struct Trajectory {
  double dt = 0.1;
  std::vector<TrajectorySample> samples;  // samples[k] at t = k*dt

  std::size_t steps() const { return samples.empty() ? 0 : samples.size() - 1; }
  double duration() const { return dt * static_cast<double>(steps()); }

  double path_length() const {
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < samples.size(); ++k)
      len += (samples[k + 1].pose.p - samples[k].pose.p).norm();
    return len;
  }
};

namespace detail {
inline void check_positive(double v, const char* name) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string("trajectory: ") + name + " must be positive");
}
}  // namespace detail

// Straight segment traversed at constant speed, heading fixed at zero.
inline Trajectory line_trajectory(double length, double speed, double frequency) {
  detail::check_positive(length, "length");
  detail::check_positive(speed, "speed");
  detail::check_positive(frequency, "frequency");

  Trajectory traj;
  traj.dt = 1.0 / frequency;
  const auto steps = static_cast<std::size_t>(std::llround(length / speed * frequency));
  traj.samples.reserve(steps + 1);
  TrajectorySample s;
  s.pose = Pose(Eigen::Vector2d::Zero(), 0.0);
  s.v = Eigen::Vector2d(speed, 0.0);
  s.w = 0.0;
  traj.samples.push_back(s);
  for (std::size_t k = 0; k < steps; ++k) {
    s.pose = euler_step(s.pose, s.v, s.w, traj.dt);
    traj.samples.push_back(s);
  }
  return traj;
}

// One full revolution at constant speed; angular rate w = speed / radius.
inline Trajectory circle_trajectory(double radius, double speed, double frequency) {
  detail::check_positive(radius, "radius");
  detail::check_positive(speed, "speed");
  detail::check_positive(frequency, "frequency");

  Trajectory traj;
  traj.dt = 1.0 / frequency;
  const double duration = 2.0 * kPi * radius / speed;
  const auto steps = static_cast<std::size_t>(std::llround(duration * frequency));
  traj.samples.reserve(steps + 1);
  TrajectorySample s;
  s.pose = Pose(Eigen::Vector2d::Zero(), 0.0);
  s.v = Eigen::Vector2d(speed, 0.0);
  s.w = speed / radius;
  traj.samples.push_back(s);
  for (std::size_t k = 0; k < steps; ++k) {
    s.pose = euler_step(s.pose, s.v, s.w, traj.dt);
    traj.samples.push_back(s);
  }
  return traj;
}

// Natural cubic spline through the waypoints, parameterized uniformly in
// time.  The spline supplies the control profile: forward speed |p'(t)| and
// angular rate d/dt atan2(y', x'); the stored poses are the Euler chain of
// those controls started from the spline's initial point and heading.
inline Trajectory spline_trajectory(const std::vector<Eigen::Vector2d>& waypoints,
                                    double total_time, double frequency) {
  if (waypoints.size() < 4) throw std::invalid_argument("trajectory: need at least 4 waypoints");
  detail::check_positive(total_time, "total_time");
  detail::check_positive(frequency, "frequency");

  std::vector<double> knots(waypoints.size()), xs(waypoints.size()), ys(waypoints.size());
  for (std::size_t j = 0; j < waypoints.size(); ++j) {
    knots[j] = total_time * static_cast<double>(j) / static_cast<double>(waypoints.size() - 1);
    xs[j] = waypoints[j].x();
    ys[j] = waypoints[j].y();
  }
  NaturalCubicSpline sx(knots, xs), sy(std::move(knots), ys);

  Trajectory traj;
  traj.dt = 1.0 / frequency;
  const auto steps = static_cast<std::size_t>(std::llround(total_time * frequency));

  auto controls_at = [&](double t) {
    const double vx = sx.derivative(t);
    const double vy = sy.derivative(t);
    const double speed2 = vx * vx + vy * vy;
    const double speed = std::sqrt(speed2);
    if (speed < 1e-6)
      throw std::invalid_argument("trajectory: spline speed vanishes, heading undefined");
    const double w = (vx * sy.second_derivative(t) - vy * sx.second_derivative(t)) / speed2;
    return std::pair<Eigen::Vector2d, double>(Eigen::Vector2d(speed, 0.0), w);
  };

  traj.samples.reserve(steps + 1);
  TrajectorySample s;
  s.pose = Pose(Eigen::Vector2d(sx.value(0.0), sy.value(0.0)),
                std::atan2(sy.derivative(0.0), sx.derivative(0.0)));
  std::tie(s.v, s.w) = controls_at(0.0);
  traj.samples.push_back(s);
  for (std::size_t k = 0; k < steps; ++k) {
    const Pose next = euler_step(s.pose, s.v, s.w, traj.dt);
    s.pose = next;
    std::tie(s.v, s.w) = controls_at(static_cast<double>(k + 1) * traj.dt);
    traj.samples.push_back(s);
  }
  return traj;
}

}  // namespace rekf
