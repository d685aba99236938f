#include <random>

#include <Eigen/LU>
#include <catch2/catch_amalgamated.hpp>

#include "rekf/se2.hpp"

using namespace rekf;

TEST_CASE("rot basics") {
  CHECK(rot(0.0).isApprox(Eigen::Matrix2d::Identity(), 1e-15));
  CHECK(rot(kPi / 2.0).isApprox(kJ, 1e-12));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double th = angle(rng);
    const Eigen::Matrix2d r = rot(th);
    CHECK((r * r.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(r.determinant() == Catch::Approx(1.0).margin(1e-14));
  }
}

TEST_CASE("rot is a homomorphism") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const double a = angle(rng), b = angle(rng);
    CHECK((rot(a) * rot(b) - rot(a + b)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("skew generator identities") {
  CHECK((kJ * kJ + Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((kJ.transpose() + kJ).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("wrap_angle convention (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(3.0 * kPi) == Catch::Approx(kPi).margin(1e-12));
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi).margin(1e-12));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi).margin(1e-12));
  // Just below -pi wraps up to just below +pi.
  const double w = wrap_angle(-kPi - 1e-9);
  CHECK(w > 0.0);
  CHECK(w == Catch::Approx(kPi - 1e-9).margin(1e-12));
  // Output is congruent to the input mod 2*pi.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> angle(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double th = angle(rng);
    const double r = wrap_angle(th);
    CHECK(r > -kPi);
    CHECK(r <= kPi);
    CHECK(std::remainder(r - th, 2.0 * kPi) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("to_relative hand cases") {
  CHECK(to_relative(Pose({0, 0}, 0.0), {1, 2}).isApprox(Eigen::Vector2d(1, 2), 1e-15));
  CHECK((to_relative(Pose({1, 0}, kPi / 2.0), {1, 1}) - Eigen::Vector2d(1, 0)).norm() < 1e-12);
}

TEST_CASE("to_global hand cases") {
  CHECK(to_global(Pose({0, 0}, 0.0), {3, -1}).isApprox(Eigen::Vector2d(3, -1), 1e-15));
  CHECK((to_global(Pose({1, 1}, kPi), {1, 0}) - Eigen::Vector2d(0, 1)).norm() < 1e-12);
}

TEST_CASE("to_relative and to_global are inverse") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> coord(-20.0, 20.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int i = 0; i < 100; ++i) {
    const Pose pose({coord(rng), coord(rng)}, angle(rng));
    const Eigen::Vector2d pf(coord(rng), coord(rng));
    CHECK((to_global(pose, to_relative(pose, pf)) - pf).norm() < 1e-12);
    const Eigen::Vector2d z(coord(rng), coord(rng));
    CHECK((to_relative(pose, to_global(pose, z)) - z).norm() < 1e-12);
  }
}

namespace {

std::vector<Eigen::Vector2d> random_features(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> coord(-20.0, 20.0);
  std::vector<Eigen::Vector2d> out;
  for (int i = 0; i < count; ++i) out.emplace_back(coord(rng), coord(rng));
  return out;
}

}  // namespace

TEST_CASE("group action identity and pure translation") {
  std::mt19937_64 rng(11);
  const Pose pose({1.0, -2.0}, 0.7);
  const auto features = random_features(rng, 5);

  const auto [same_pose, same_features] = apply_group_action(GroupElement{}, pose, features);
  CHECK((same_pose.p - pose.p).norm() == 0.0);
  CHECK(same_pose.theta == Catch::Approx(pose.theta).margin(1e-15));
  for (size_t i = 0; i < features.size(); ++i)
    CHECK((same_features[i] - features[i]).norm() == 0.0);

  const GroupElement shift{{1.0, 0.0}, 0.0};
  const auto [moved_pose, moved_features] = apply_group_action(shift, pose, features);
  for (size_t i = 0; i < features.size(); ++i) {
    const Eigen::Vector2d before = to_relative(pose, features[i]);
    const Eigen::Vector2d after = to_relative(moved_pose, moved_features[i]);
    CHECK((after - before).norm() < 1e-12);
  }
}

TEST_CASE("relative coordinates invariant under the group action") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> coord(-20.0, 20.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose pose({coord(rng), coord(rng)}, angle(rng));
    const auto features = random_features(rng, 3);
    const GroupElement g{{coord(rng), coord(rng)}, angle(rng)};
    const auto [moved_pose, moved_features] = apply_group_action(g, pose, features);
    for (size_t i = 0; i < features.size(); ++i) {
      const Eigen::Vector2d before = to_relative(pose, features[i]);
      const Eigen::Vector2d after = to_relative(moved_pose, moved_features[i]);
      CHECK((after - before).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("group action composes") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose pose({coord(rng), coord(rng)}, angle(rng));
    const auto features = random_features(rng, 2);
    const GroupElement g1{{coord(rng), coord(rng)}, angle(rng)};
    const GroupElement g2{{coord(rng), coord(rng)}, angle(rng)};

    const auto [p2, f2] = apply_group_action(g2, pose, features);
    const auto [p21, f21] = apply_group_action(g1, p2, f2);
    const auto [pc, fc] = apply_group_action(compose(g1, g2), pose, features);

    CHECK((p21.p - pc.p).norm() < 1e-12);
    CHECK(std::abs(wrap_angle(p21.theta - pc.theta)) < 1e-12);
    for (size_t i = 0; i < features.size(); ++i) CHECK((f21[i] - fc[i]).norm() < 1e-12);
  }
}
