#pragma once

// Simulated odometry and binocular camera.  Each camera measures the bearing
// to a feature with Gaussian noise; the two bearings are intersected to give
// a relative-position measurement in the robot frame, with a first-order
// covariance propagated through the intersection.

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "rekf/scenario.hpp"
#include "rekf/se2.hpp"

namespace rekf {

struct OdometryReading {
  Eigen::Vector2d v_m{0.0, 0.0};  // measured body-frame velocity, m/s
  double w_m = 0.0;               // measured angular rate, rad/s
};

struct RelativeMeasurement {
  int feature_id = -1;
  Eigen::Vector2d z{0.0, 0.0};                      // robot-frame position, m
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();  // SPD
};

// Two forward-facing cameras mounted left and right on the body rim.
struct CameraRig {
  Eigen::Vector2d left_offset{0.0, 0.25};
  Eigen::Vector2d right_offset{0.0, -0.25};
  double fov = 2.0 * kPi / 3.0;  // full field angle per camera
  double max_range = 5.0;        // features farther from the body center are ignored

  static CameraRig for_robot(double diameter, double fov, double max_range) {
    CameraRig rig;
    rig.left_offset = Eigen::Vector2d(0.0, diameter / 2.0);
    rig.right_offset = Eigen::Vector2d(0.0, -diameter / 2.0);
    rig.fov = fov;
    rig.max_range = max_range;
    return rig;
  }
};

inline OdometryReading odometry_read(const Eigen::Vector2d& true_v, double true_w,
                                     const Eigen::Matrix2d& qv, double qw,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  OdometryReading out;
  // qv is diagonal in every scenario here; sample per axis.
  out.v_m = true_v + Eigen::Vector2d(std::sqrt(qv(0, 0)) * unit(rng), std::sqrt(qv(1, 1)) * unit(rng));
  out.w_m = true_w + std::sqrt(qw) * unit(rng);
  return out;
}

// A feature is usable only if both cameras see it: within max_range of the
// body center and inside the field of view of each camera.
inline bool feature_visible(const Pose& pose, const CameraRig& rig, const Eigen::Vector2d& pf) {
  if ((pf - pose.p).norm() > rig.max_range) return false;
  const Eigen::Vector2d rel = to_relative(pose, pf);
  for (const auto* offset : {&rig.left_offset, &rig.right_offset}) {
    const Eigen::Vector2d d = rel - *offset;
    if (std::abs(std::atan2(d.y(), d.x())) > rig.fov / 2.0) return false;
  }
  return true;
}

inline std::vector<int> visible_features(const Pose& pose, const CameraRig& rig,
                                         const FeatureMap& map) {
  std::vector<int> out;
  for (std::size_t i = 0; i < map.size(); ++i)
    if (feature_visible(pose, rig, map.positions[i])) out.push_back(map.ids[i]);
  return out;
}

// Noisy bearing from a camera at cam_pose (world frame) to the feature.
inline double bearing_measure(const Pose& cam_pose, const Eigen::Vector2d& pf, double qz,
                              std::mt19937_64& rng) {
  const Eigen::Vector2d rel = to_relative(cam_pose, pf);
  if (rel.norm() < 1e-12)
    throw std::invalid_argument("bearing_measure: feature at the camera origin");
  std::normal_distribution<double> unit(0.0, 1.0);
  return std::atan2(rel.y(), rel.x()) + std::sqrt(qz) * unit(rng);
}

// Intersects the two bearing rays in the robot frame.  Returns nothing when
// the rays are parallel within 1e-4 rad (unstable triangulation; the caller
// drops the feature for this step).  The covariance is J diag(qz, qz) J^T
// with J the Jacobian of the intersection w.r.t. the two bearings.
inline std::optional<RelativeMeasurement> triangulate(double bearing_left, double bearing_right,
                                                      const CameraRig& rig, double qz) {
  if (std::abs(std::sin(bearing_left - bearing_right)) < 1e-4) return std::nullopt;

  const Eigen::Vector2d dl(std::cos(bearing_left), std::sin(bearing_left));
  const Eigen::Vector2d dr(std::cos(bearing_right), std::sin(bearing_right));
  const Eigen::Vector2d dl_perp(-dl.y(), dl.x());
  const Eigen::Vector2d dr_perp(-dr.y(), dr.x());

  Eigen::Matrix2d m;
  m.col(0) = dl;
  m.col(1) = -dr;
  const Eigen::Matrix2d m_inv = m.inverse();
  const Eigen::Vector2d t = m_inv * (rig.right_offset - rig.left_offset);  // ray parameters

  RelativeMeasurement out;
  out.z = rig.left_offset + t(0) * dl;

  // dt = -M^-1 dM t; columns of dM/d(bearing) hold the rotated directions.
  const Eigen::Vector2d dt_left = -m_inv * (dl_perp * t(0));
  const Eigen::Vector2d dt_right = -m_inv * (-dr_perp * t(1));
  const Eigen::Vector2d dz_left = dt_left(0) * dl + t(0) * dl_perp;
  const Eigen::Vector2d dz_right = dt_right(0) * dl;
  out.cov = qz * (dz_left * dz_left.transpose() + dz_right * dz_right.transpose());
  // Keep the covariance invertible even for degenerate noise settings
  // (qz = 0); invisible at realistic noise levels.
  out.cov += 1e-12 * Eigen::Matrix2d::Identity();
  return out;
}

// Full measurement pipeline at one pose: visibility gating, one noisy bearing
// per camera, triangulation.  Features with unstable ray intersections are
// skipped.  Draw order is the stored feature order, so the stream is a pure
// function of the rng state.
inline std::vector<RelativeMeasurement> observe(const Pose& pose, const CameraRig& rig,
                                                const FeatureMap& map, double qz,
                                                std::mt19937_64& rng) {
  std::vector<RelativeMeasurement> out;
  const Eigen::Matrix2d r = pose.rotation();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!feature_visible(pose, rig, map.positions[i])) continue;
    const Pose left(pose.p + r * rig.left_offset, pose.theta);
    const Pose right(pose.p + r * rig.right_offset, pose.theta);
    const double bl = bearing_measure(left, map.positions[i], qz, rng);
    const double br = bearing_measure(right, map.positions[i], qz, rng);
    if (auto meas = triangulate(bl, br, rig, qz)) {
      meas->feature_id = map.ids[i];
      out.push_back(*meas);
    }
  }
  return out;
}

// Calibrates the scatter density so that the average number of visible
// features per trajectory sample hits the target.  Visibility scales
// linearly with density, so one counting pass at a reference density
// suffices.  Uses a fixed internal seed: the result depends only on the
// trajectory and geometry.
inline double calibrate_density(const Trajectory& traj, const CameraRig& rig,
                                double corridor_halfwidth, double target_avg_visible) {
  const double reference_density = 4.0;
  std::mt19937_64 rng(0x5eedca11b0a7ull);
  const FeatureMap probe = scatter_features(traj, reference_density, corridor_halfwidth, rng);
  double total = 0.0;
  for (const auto& s : traj.samples)
    total += static_cast<double>(visible_features(s.pose, rig, probe).size());
  const double avg = total / static_cast<double>(traj.samples.size());
  if (!(avg > 0.0)) throw std::runtime_error("calibrate_density: no features ever visible");
  return reference_density * target_avg_visible / avg;
}

}  // namespace rekf
