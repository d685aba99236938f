#pragma once

// Planar rigid-body primitives: poses, rotations, the robot-frame /
// world-frame coordinate change for point features, and the SE(2)
// group action on (pose, feature) states.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rekf {

inline constexpr double kPi = std::numbers::pi;

// 90-degree rotation generator, J = [[0,-1],[1,0]].  J^2 = -I, J^T = -J.
inline const Eigen::Matrix2d kJ = (Eigen::Matrix2d() << 0.0, -1.0, 1.0, 0.0).finished();

// Wraps an angle to (-pi, pi].  Already-wrapped values pass through
// unchanged, so wrapping is idempotent at the bit level.
inline double wrap_angle(double theta) {
  if (theta > -kPi && theta <= kPi) return theta;
  double r = std::fmod(theta + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

inline Eigen::Matrix2d rot(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// Robot pose: world position p and heading theta, stored wrapped to (-pi, pi].
struct Pose {
  Eigen::Vector2d p{0.0, 0.0};
  double theta = 0.0;

  Pose() = default;
  Pose(const Eigen::Vector2d& position, double heading) : p(position), theta(wrap_angle(heading)) {}

  Eigen::Matrix2d rotation() const { return rot(theta); }
};

// Feature position in the robot frame: z = R(theta)^T (pf - p).
inline Eigen::Vector2d to_relative(const Pose& pose, const Eigen::Vector2d& pf) {
  return pose.rotation().transpose() * (pf - pose.p);
}

// Inverse of to_relative at the same pose: pf = p + R(theta) z.
inline Eigen::Vector2d to_global(const Pose& pose, const Eigen::Vector2d& z) {
  return pose.p + pose.rotation() * z;
}

// Rigid motion acting on the whole state: rotation first, then translation.
struct GroupElement {
  Eigen::Vector2d dp{0.0, 0.0};
  double dtheta = 0.0;
};

// SE(2) product g1 * g2 (acting by g2 first, then g1).
inline GroupElement compose(const GroupElement& g1, const GroupElement& g2) {
  return GroupElement{g1.dp + rot(g1.dtheta) * g2.dp, g1.dtheta + g2.dtheta};
}

// Moves pose and features together:
//   p   -> R(dtheta) p   + dp
//   th  -> th + dtheta
//   pf  -> R(dtheta) pf  + dp
// All robot-frame feature coordinates are invariant under this action.
inline std::pair<Pose, std::vector<Eigen::Vector2d>> apply_group_action(
    const GroupElement& g, const Pose& pose, const std::vector<Eigen::Vector2d>& features) {
  const Eigen::Matrix2d r = rot(g.dtheta);
  Pose moved(r * pose.p + g.dp, pose.theta + g.dtheta);
  std::vector<Eigen::Vector2d> moved_features;
  moved_features.reserve(features.size());
  for (const auto& pf : features) moved_features.emplace_back(r * pf + g.dp);
  return {moved, std::move(moved_features)};
}

}  // namespace rekf
