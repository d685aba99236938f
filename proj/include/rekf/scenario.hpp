#pragma once

// World description for one simulation: ground-truth trajectory, random
// feature map scattered in a corridor around the path, and the sensor noise
// and geometry constants.  Scenarios serialize to a diffable text file so a
// run can be saved and replayed.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rekf/se2.hpp"
#include "rekf/trajectory.hpp"

namespace rekf {

struct FeatureMap {
  std::vector<int> ids;  // unique, parallel to positions
  std::vector<Eigen::Vector2d> positions;

  std::size_t size() const { return ids.size(); }
};

struct NoiseParams {
  Eigen::Matrix2d qv = Eigen::Matrix2d::Identity() * 0.01;  // odometry velocity covariance
  double qw = 0.01;   // odometry angular-rate variance
  double qz = 1e-4;   // per-camera bearing variance, rad^2
};

struct Scenario {
  Trajectory trajectory;
  FeatureMap features;
  NoiseParams noise;
  double robot_diameter = 0.5;
  double fov = 2.0 * kPi / 3.0;  // 120 degrees per camera
  double max_range = 5.0;
  std::uint64_t seed = 0;
};

// Scatters round(density * path_length) features uniformly in the corridor
// of the given half-width around the path.  Pure function of (trajectory,
// density, rng state).
inline FeatureMap scatter_features(const Trajectory& traj, double density,
                                   double corridor_halfwidth, std::mt19937_64& rng) {
  if (!(density > 0.0)) throw std::invalid_argument("scatter_features: density must be positive");
  FeatureMap map;
  const double length = traj.path_length();
  const auto count = static_cast<std::size_t>(std::llround(density * length));
  if (length <= 0.0 || count == 0) return map;

  std::vector<double> cumulative(traj.samples.size(), 0.0);
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k)
    cumulative[k + 1] =
        cumulative[k] + (traj.samples[k + 1].pose.p - traj.samples[k].pose.p).norm();

  std::uniform_real_distribution<double> along(0.0, length);
  std::uniform_real_distribution<double> across(-corridor_halfwidth, corridor_halfwidth);
  map.ids.reserve(count);
  map.positions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = along(rng);
    const double e = across(rng);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t k = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    k = std::min(std::max<std::size_t>(k, 1), cumulative.size() - 1) - 1;
    const Eigen::Vector2d a = traj.samples[k].pose.p;
    const Eigen::Vector2d b = traj.samples[k + 1].pose.p;
    const double seg = (b - a).norm();
    const Eigen::Vector2d dir = seg > 0.0 ? ((b - a) / seg).eval() : Eigen::Vector2d(1.0, 0.0);
    const Eigen::Vector2d point = a + (u - cumulative[k]) * dir;
    map.ids.push_back(static_cast<int>(i));
    map.positions.emplace_back(point + e * (kJ * dir));
  }
  return map;
}

namespace detail {
inline std::string fmt_full(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace detail

inline void save_scenario(std::ostream& os, const Scenario& sc) {
  auto num = detail::fmt_full;
  os << "[scenario]\n";
  os << "robot_diameter = " << num(sc.robot_diameter) << "\n";
  os << "fov = " << num(sc.fov) << "\n";
  os << "max_range = " << num(sc.max_range) << "\n";
  os << "seed = " << sc.seed << "\n";
  os << "\n[noise]\n";
  os << "qv = " << num(sc.noise.qv(0, 0)) << " " << num(sc.noise.qv(0, 1)) << " "
     << num(sc.noise.qv(1, 0)) << " " << num(sc.noise.qv(1, 1)) << "\n";
  os << "qw = " << num(sc.noise.qw) << "\n";
  os << "qz = " << num(sc.noise.qz) << "\n";
  os << "\n[trajectory]\n";
  os << "dt = " << num(sc.trajectory.dt) << "\n";
  os << "# px py theta vx vy w\n";
  for (const auto& s : sc.trajectory.samples)
    os << num(s.pose.p.x()) << " " << num(s.pose.p.y()) << " " << num(s.pose.theta) << " "
       << num(s.v.x()) << " " << num(s.v.y()) << " " << num(s.w) << "\n";
  os << "\n[features]\n";
  os << "# id,x,y\n";
  for (std::size_t i = 0; i < sc.features.size(); ++i)
    os << sc.features.ids[i] << "," << num(sc.features.positions[i].x()) << ","
       << num(sc.features.positions[i].y()) << "\n";
}

inline void save_scenario(const std::string& path, const Scenario& sc) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_scenario: cannot open " + path);
  save_scenario(os, sc);
}

inline Scenario load_scenario(std::istream& is) {
  Scenario sc;
  std::string line, section;
  auto fail = [](const std::string& why) { throw std::runtime_error("load_scenario: " + why); };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      section = line;
      continue;
    }
    if (section == "[scenario]" || section == "[noise]") {
      auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected key = value: " + line);
      std::string key = line.substr(0, eq);
      key.erase(key.find_last_not_of(' ') + 1);
      std::istringstream val(line.substr(eq + 1));
      if (key == "robot_diameter") val >> sc.robot_diameter;
      else if (key == "fov") val >> sc.fov;
      else if (key == "max_range") val >> sc.max_range;
      else if (key == "seed") val >> sc.seed;
      else if (key == "qv") val >> sc.noise.qv(0, 0) >> sc.noise.qv(0, 1) >> sc.noise.qv(1, 0) >> sc.noise.qv(1, 1);
      else if (key == "qw") val >> sc.noise.qw;
      else if (key == "qz") val >> sc.noise.qz;
      else fail("unknown key " + key);
      if (val.fail()) fail("bad value for " + key);
    } else if (section == "[trajectory]") {
      if (line.rfind("dt", 0) == 0) {
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected dt = value");
        sc.trajectory.dt = std::stod(line.substr(eq + 1));
        continue;
      }
      std::istringstream row(line);
      double px, py, theta, vx, vy, w;
      if (!(row >> px >> py >> theta >> vx >> vy >> w)) fail("bad trajectory row: " + line);
      TrajectorySample s;
      s.pose = Pose(Eigen::Vector2d(px, py), theta);
      s.v = Eigen::Vector2d(vx, vy);
      s.w = w;
      sc.trajectory.samples.push_back(s);
    } else if (section == "[features]") {
      std::istringstream row(line);
      std::string tok;
      int id;
      double x, y;
      if (!std::getline(row, tok, ',')) fail("bad feature row: " + line);
      id = std::stoi(tok);
      if (!std::getline(row, tok, ',')) fail("bad feature row: " + line);
      x = std::stod(tok);
      if (!std::getline(row, tok, ',')) fail("bad feature row: " + line);
      y = std::stod(tok);
      sc.features.ids.push_back(id);
      sc.features.positions.emplace_back(x, y);
    } else if (!section.empty()) {
      fail("unknown section " + section);
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_scenario: cannot open " + path);
  return load_scenario(is);
}

}  // namespace rekf
