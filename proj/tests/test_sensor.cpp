#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rekf/sensor.hpp"
#include "rekf/trajectory.hpp"

using namespace rekf;
using Catch::Approx;

namespace {

// Noise-free bearings from both cameras to a world feature.
std::pair<double, double> exact_bearings(const Pose& pose, const CameraRig& rig,
                                         const Eigen::Vector2d& pf) {
  const Eigen::Matrix2d r = pose.rotation();
  const Pose left(pose.p + r * rig.left_offset, pose.theta);
  const Pose right(pose.p + r * rig.right_offset, pose.theta);
  const Eigen::Vector2d dl = to_relative(left, pf);
  const Eigen::Vector2d dr = to_relative(right, pf);
  return {std::atan2(dl.y(), dl.x()), std::atan2(dr.y(), dr.x())};
}

}  // namespace

TEST_CASE("odometry_read") {
  std::mt19937_64 rng(41);
  const Eigen::Vector2d v(1.0, -0.5);

  const auto exact = odometry_read(v, 0.2, Eigen::Matrix2d::Zero(), 0.0, rng);
  CHECK(exact.v_m == v);
  CHECK(exact.w_m == 0.2);

  // Sample mean of many readings recovers the truth within 3 sigma / sqrt(n),
  // and the sample std matches the configured noise level.
  const Eigen::Matrix2d qv = Eigen::Matrix2d::Identity() * 0.01;
  const double qw = 0.01;
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  double sum_w = 0.0, sum_w2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto r = odometry_read(v, 0.2, qv, qw, rng);
    sum += r.v_m;
    sum_w += r.w_m;
    sum_w2 += r.w_m * r.w_m;
  }
  const double tol = 3.0 * 0.1 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum.x() / n - v.x()) < tol);
  CHECK(std::abs(sum.y() / n - v.y()) < tol);
  CHECK(std::abs(sum_w / n - 0.2) < tol);
  const double w_std = std::sqrt(sum_w2 / n - (sum_w / n) * (sum_w / n));
  CHECK(w_std == Approx(0.1).epsilon(0.05));
}

TEST_CASE("visibility gating") {
  const CameraRig rig = CameraRig::for_robot(0.5, 2.0 * kPi / 3.0, 5.0);
  const Pose pose({0.0, 0.0}, 0.0);
  FeatureMap map;
  map.ids = {0, 1, 2, 3};
  map.positions = {
      {10.0, 0.0},  // far ahead: out of range
      {1.0, 0.0},   // dead ahead at 1 m: visible
      {-1.0, 0.0},  // directly behind: outside both cones
      {3.0, 1.0},   // ahead and slightly left: visible
  };
  const auto visible = visible_features(pose, rig, map);
  CHECK(visible == std::vector<int>{1, 3});

  // The same scene under a rigid motion gives the same visibility set.
  const GroupElement g{{4.0, -2.0}, 1.1};
  const auto [moved_pose, moved_features] = apply_group_action(g, pose, map.positions);
  FeatureMap moved_map{map.ids, moved_features};
  CHECK(visible_features(moved_pose, rig, moved_map) == visible);
}

TEST_CASE("bearing_measure basics") {
  std::mt19937_64 rng(42);
  const Pose cam({0.0, 0.0}, 0.0);
  CHECK(bearing_measure(cam, {2.0, 0.0}, 0.0, rng) == Approx(0.0).margin(1e-15));
  CHECK(bearing_measure(cam, {0.0, 3.0}, 0.0, rng) == Approx(kPi / 2.0).margin(1e-15));
  CHECK_THROWS_AS(bearing_measure(cam, {0.0, 0.0}, 0.0, rng), std::invalid_argument);

  // Bearing noise std matches sqrt(qz).
  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double b = bearing_measure(cam, {2.0, 0.0}, 1e-4, rng);
    sum += b;
    sum2 += b * b;
  }
  const double std_est = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  CHECK(std_est == Approx(0.01).epsilon(0.05));
}

TEST_CASE("triangulation is exact on noise-free bearings") {
  const CameraRig rig = CameraRig::for_robot(0.5, 2.0 * kPi / 3.0, 5.0);

  {
    const Pose pose({0.0, 0.0}, 0.0);
    const auto [bl, br] = exact_bearings(pose, rig, {1.0, 0.0});
    const auto meas = triangulate(bl, br, rig, 0.0);
    REQUIRE(meas.has_value());
    CHECK((meas->z - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-9);
  }

  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> coord(-20.0, 20.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  int checked = 0;
  while (checked < 100) {
    const Pose pose({coord(rng), coord(rng)}, angle(rng));
    const Eigen::Vector2d pf(coord(rng), coord(rng));
    if (!feature_visible(pose, rig, pf)) continue;
    const auto [bl, br] = exact_bearings(pose, rig, pf);
    const auto meas = triangulate(bl, br, rig, 0.0);
    REQUIRE(meas.has_value());
    CHECK((meas->z - to_relative(pose, pf)).norm() < 1e-9);
    ++checked;
  }
}

TEST_CASE("triangulation drops near-parallel rays") {
  const CameraRig rig;
  CHECK(!triangulate(0.3, 0.3, rig, 1e-4).has_value());
  CHECK(!triangulate(0.3, 0.3 + 5e-5, rig, 1e-4).has_value());
  CHECK(triangulate(0.3, 0.1, rig, 1e-4).has_value());
}

TEST_CASE("triangulation covariance matches Monte Carlo and finite differences") {
  const CameraRig rig = CameraRig::for_robot(0.5, 2.0 * kPi / 3.0, 5.0);
  const Pose pose({0.0, 0.0}, 0.0);
  const Eigen::Vector2d pf(3.0, 0.8);
  const double qz = 1e-4;
  const auto [bl, br] = exact_bearings(pose, rig, pf);
  const auto meas = triangulate(bl, br, rig, qz);
  REQUIRE(meas.has_value());

  // Finite-difference Jacobian reproduces the covariance.
  const auto z_of = [&](const Eigen::VectorXd& b) {
    return Eigen::VectorXd(triangulate(b(0), b(1), rig, 0.0)->z);
  };
  Eigen::VectorXd b0(2);
  b0 << bl, br;
  const Eigen::MatrixXd jac = oracles::numeric_jacobian(z_of, b0, 1e-7);
  const Eigen::Matrix2d cov_fd = qz * (jac * jac.transpose());
  CHECK((meas->cov - cov_fd).norm() / cov_fd.norm() < 1e-4);

  // Monte Carlo of the noisy triangulation.
  std::mt19937_64 rng(44);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n = 100000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  int kept = 0;
  for (int i = 0; i < n; ++i) {
    const double nl = bl + std::sqrt(qz) * unit(rng);
    const double nr = br + std::sqrt(qz) * unit(rng);
    const auto m = triangulate(nl, nr, rig, qz);
    if (!m) continue;
    mean += m->z;
    second += m->z * m->z.transpose();
    ++kept;
  }
  mean /= kept;
  const Eigen::Matrix2d cov_mc = second / kept - mean * mean.transpose();
  CHECK((cov_mc - meas->cov).norm() / meas->cov.norm() < 0.15);
}

TEST_CASE("triangulated covariance grows with the geometry scale") {
  const double bl = 0.25, br = -0.2;  // fixed bearings
  double previous = 0.0;
  for (double scale : {1.0, 1.5, 2.0, 3.0, 5.0}) {
    CameraRig rig;
    rig.left_offset *= scale;
    rig.right_offset *= scale;
    const auto meas = triangulate(bl, br, rig, 1e-4);
    REQUIRE(meas.has_value());
    const double trace = meas->cov.trace();
    CHECK(trace > previous);
    previous = trace;
  }
}

TEST_CASE("sensor pipeline is invariant under the group action") {
  const CameraRig rig = CameraRig::for_robot(0.5, 2.0 * kPi / 3.0, 5.0);
  const Trajectory traj = circle_trajectory(5.0, 1.0, 10.0);
  std::mt19937_64 map_rng(45);
  const FeatureMap map = scatter_features(traj, 1.0, 2.0, map_rng);

  const GroupElement g{{7.0, -3.0}, 2.1};
  FeatureMap moved_map = map;
  for (std::size_t k = 0; k < traj.samples.size(); k += 17) {
    const Pose pose = traj.samples[k].pose;
    const auto [moved_pose, moved_positions] = apply_group_action(g, pose, map.positions);
    moved_map.positions = moved_positions;

    std::mt19937_64 rng_a(46 + k), rng_b(46 + k);
    const auto batch = observe(pose, rig, map, 1e-4, rng_a);
    const auto moved_batch = observe(moved_pose, rig, moved_map, 1e-4, rng_b);
    REQUIRE(batch.size() == moved_batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(batch[i].feature_id == moved_batch[i].feature_id);
      CHECK((batch[i].z - moved_batch[i].z).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((batch[i].cov - moved_batch[i].cov).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("calibrate_density hits the visible-count target") {
  const CameraRig rig = CameraRig::for_robot(0.5, 2.0 * kPi / 3.0, 5.0);
  const Trajectory traj = line_trajectory(60.0, 1.0, 10.0);
  const double density = calibrate_density(traj, rig, 2.0, 20.0);

  std::mt19937_64 rng(47);
  const FeatureMap map = scatter_features(traj, density, 2.0, rng);
  double total = 0.0;
  for (const auto& s : traj.samples)
    total += static_cast<double>(visible_features(s.pose, rig, map).size());
  const double avg = total / static_cast<double>(traj.samples.size());
  CHECK(avg == Approx(20.0).epsilon(0.2));

  // Doubling the density doubles the average visible count.
  std::mt19937_64 rng2(47);
  const FeatureMap dense = scatter_features(traj, 2.0 * density, 2.0, rng2);
  double total2 = 0.0;
  for (const auto& s : traj.samples)
    total2 += static_cast<double>(visible_features(s.pose, rig, dense).size());
  CHECK(total2 / total == Approx(2.0).epsilon(0.2));
}
