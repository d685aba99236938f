#pragma once

// Monte Carlo harness: builds scenarios for the configuration grid, drives
// the three filters over one shared sensor stream per realization, scores
// per-step pose errors against ground truth, and aggregates them into the
// results table.  Every random stream is keyed by (base_seed, cell,
// realization), so serial and parallel runs produce identical output.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rekf/filters.hpp"
#include "rekf/random.hpp"
#include "rekf/scenario.hpp"
#include "rekf/se2.hpp"
#include "rekf/sensor.hpp"
#include "rekf/trajectory.hpp"

namespace rekf {

enum class TrajectoryKind { Line, Circle, General };
enum class DensityTier { Low, High };

inline const char* to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Line: return "line";
    case TrajectoryKind::Circle: return "circle";
    default: return "general";
  }
}

inline const char* to_string(DensityTier t) { return t == DensityTier::Low ? "low" : "high"; }

struct CellConfig {
  TrajectoryKind trajectory = TrajectoryKind::Line;
  DensityTier density = DensityTier::Low;
  double frequency = 10.0;  // Hz
  double qz = 1e-4;         // bearing variance, rad^2
};

// Stable identity of a grid cell; the per-cell random streams are keyed on
// it, so results do not depend on which other cells a run contains.
inline std::string cell_key(const CellConfig& c) {
  std::ostringstream os;
  os << to_string(c.trajectory) << "|" << to_string(c.density) << "|" << c.frequency << "|"
     << c.qz;
  return os.str();
}

struct SensorParams {
  Eigen::Matrix2d qv = Eigen::Matrix2d::Identity() * 0.01;
  double qw = 0.01;
  double robot_diameter = 0.5;
  double fov = 2.0 * kPi / 3.0;
  double max_range = 5.0;
  double corridor_halfwidth = 2.0;

  CameraRig rig() const { return CameraRig::for_robot(robot_diameter, fov, max_range); }
};

struct ExperimentConfig {
  std::vector<TrajectoryKind> trajectories{TrajectoryKind::Line, TrajectoryKind::Circle,
                                           TrajectoryKind::General};
  std::vector<DensityTier> densities{DensityTier::Low, DensityTier::High};
  std::vector<double> frequencies{10.0, 20.0};
  std::vector<double> qz_values{1e-4, 2e-4, 4e-4};
  int realizations = 20;
  std::uint64_t base_seed = 0;
  SensorParams sensors;

  std::vector<CellConfig> cells() const {
    std::vector<CellConfig> out;
    for (auto traj : trajectories)
      for (auto den : densities)
        for (double f : frequencies)
          for (double qz : qz_values) out.push_back(CellConfig{traj, den, f, qz});
    return out;
  }
};

// Waypoints of the built-in general trajectory: a loop with unevenly spaced
// corners, so the spline's uniform-in-time parameterization produces the
// speed-up around turns that stresses the propagation step.
inline const std::vector<Eigen::Vector2d>& general_waypoints() {
  static const std::vector<Eigen::Vector2d> wps = {
      {0.0, 0.0}, {6.0, -1.5}, {11.0, 2.0},  {12.5, 7.5}, {8.0, 11.5},
      {2.0, 12.0}, {-2.5, 8.0}, {-2.0, 3.0}, {1.5, 1.0},
  };
  return wps;
}

inline constexpr double kGeneralTotalTime = 30.0;  // seconds

// Paper-matched average visible feature counts per step.
inline double visible_target(TrajectoryKind k, DensityTier t) {
  const double low = (k == TrajectoryKind::General) ? 25.0 : 20.0;
  return t == DensityTier::Low ? low : 2.0 * low;
}

inline Trajectory make_trajectory(TrajectoryKind kind, double frequency) {
  switch (kind) {
    case TrajectoryKind::Line: return line_trajectory(60.0, 1.0, frequency);
    case TrajectoryKind::Circle: return circle_trajectory(10.0, 1.57, frequency);
    default: return spline_trajectory(general_waypoints(), kGeneralTotalTime, frequency);
  }
}

// Scenario for realization i of a cell: the trajectory is deterministic, the
// feature field is re-sampled per realization at a density calibrated to the
// cell's visible-count target.
inline Scenario build_scenario(const CellConfig& cell, const SensorParams& sensors,
                               std::uint64_t base_seed, int realization) {
  Scenario sc;
  sc.trajectory = make_trajectory(cell.trajectory, cell.frequency);
  const CameraRig rig = sensors.rig();
  const double density = calibrate_density(sc.trajectory, rig, sensors.corridor_halfwidth,
                                           visible_target(cell.trajectory, cell.density));
  const std::uint64_t cell_id = hash_key(cell_key(cell));
  sc.seed = derive_seed(base_seed, cell_id, static_cast<std::uint64_t>(realization), 1);
  auto feature_rng = make_rng(sc.seed);
  sc.features = scatter_features(sc.trajectory, density, sensors.corridor_halfwidth, feature_rng);
  sc.noise.qv = sensors.qv;
  sc.noise.qw = sensors.qw;
  sc.noise.qz = cell.qz;
  sc.robot_diameter = sensors.robot_diameter;
  sc.fov = sensors.fov;
  sc.max_range = sensors.max_range;
  return sc;
}

struct ErrorTrace {
  std::vector<double> t;
  std::vector<double> dp;   // position error norm, m
  std::vector<double> dth;  // wrapped absolute heading error, rad
  bool diverged = false;

  double mean_dp() const { return std::accumulate(dp.begin(), dp.end(), 0.0) / dp.size(); }
  double mean_dth() const { return std::accumulate(dth.begin(), dth.end(), 0.0) / dth.size(); }
};

struct RealizationTraces {
  ErrorTrace ekf, fej, reduced;
};

// One step of sensor data, consumed identically by all three filters.
struct SensorFrame {
  OdometryReading odo;
  std::vector<RelativeMeasurement> batch;
};

// Runs the three filters over one shared sensor stream.  Per step:
// propagate with the same odometry reading, register unseen features, then
// update with the same measurement batch.  A filter whose state goes
// non-finite is flagged as diverged and stops consuming the stream.
inline RealizationTraces run_realization(const CellConfig& cell, const SensorParams& sensors,
                                         std::uint64_t base_seed, int realization) {
  const Scenario sc = build_scenario(cell, sensors, base_seed, realization);
  const CameraRig rig = sensors.rig();
  const std::uint64_t cell_id = hash_key(cell_key(cell));
  auto sensor_rng = make_rng(derive_seed(base_seed, cell_id, static_cast<std::uint64_t>(realization), 2));

  const Trajectory& traj = sc.trajectory;
  const Pose start = traj.samples.front().pose;

  GlobalEkf ekf(start);
  GlobalEkf fej(start, Eigen::Matrix3d::Zero(), true);
  ReducedEkf reduced(start);
  SlamFilter* filters[3] = {&ekf, &fej, &reduced};

  RealizationTraces out;
  ErrorTrace* traces[3] = {&out.ekf, &out.fej, &out.reduced};
  const std::size_t steps = traj.steps();
  for (auto* tr : traces) {
    tr->t.reserve(steps);
    tr->dp.reserve(steps);
    tr->dth.reserve(steps);
  }

  auto feed = [&](SlamFilter& f, const std::vector<RelativeMeasurement>& batch) {
    for (const auto& m : batch)
      if (!f.has_feature(m.feature_id)) f.register_feature(m);
    f.update(batch);
  };

  const auto initial_batch = observe(start, rig, sc.features, sc.noise.qz, sensor_rng);
  for (auto* f : filters) feed(*f, initial_batch);

  for (std::size_t k = 1; k <= steps; ++k) {
    SensorFrame frame;
    frame.odo = odometry_read(traj.samples[k - 1].v, traj.samples[k - 1].w, sc.noise.qv,
                              sc.noise.qw, sensor_rng);
    frame.batch = observe(traj.samples[k].pose, rig, sc.features, sc.noise.qz, sensor_rng);

    for (int fi = 0; fi < 3; ++fi) {
      if (traces[fi]->diverged) continue;
      filters[fi]->propagate(frame.odo, traj.dt, sc.noise.qv, sc.noise.qw);
      feed(*filters[fi], frame.batch);
      if (!filters[fi]->belief().finite()) {
        traces[fi]->diverged = true;
        continue;
      }
      const auto& mean = filters[fi]->belief().state.mean;
      traces[fi]->t.push_back(static_cast<double>(k) * traj.dt);
      traces[fi]->dp.push_back((mean.head<2>() - traj.samples[k].pose.p).norm());
      traces[fi]->dth.push_back(std::abs(wrap_angle(mean(2) - traj.samples[k].pose.theta)));
    }
  }
  return out;
}

struct ResultRow {
  CellConfig cell;
  std::string method;  // "ekf", "fej", "reduced"
  double mean_dp = 0.0;
  double mean_dth = 0.0;
  int n_ok = 0;
  int n_diverged = 0;
};

// Mean over steps, then over non-diverged realizations.
inline std::vector<ResultRow> aggregate(const CellConfig& cell,
                                        const std::vector<RealizationTraces>& runs) {
  const char* names[3] = {"ekf", "fej", "reduced"};
  std::vector<ResultRow> rows;
  for (int fi = 0; fi < 3; ++fi) {
    ResultRow row;
    row.cell = cell;
    row.method = names[fi];
    double sum_dp = 0.0, sum_dth = 0.0;
    for (const auto& run : runs) {
      const ErrorTrace& tr = fi == 0 ? run.ekf : fi == 1 ? run.fej : run.reduced;
      if (tr.diverged || tr.dp.empty()) {
        ++row.n_diverged;
        continue;
      }
      sum_dp += tr.mean_dp();
      sum_dth += tr.mean_dth();
      ++row.n_ok;
    }
    if (row.n_ok == 0)
      throw std::runtime_error("aggregate: all realizations diverged for cell " + cell_key(cell) +
                               ", method " + row.method);
    row.mean_dp = sum_dp / row.n_ok;
    row.mean_dth = sum_dth / row.n_ok;
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<ResultRow> run_cell(const CellConfig& cell, const SensorParams& sensors,
                                       std::uint64_t base_seed, int realizations) {
  if (realizations < 1) throw std::invalid_argument("run_cell: need at least one realization");
  std::vector<RealizationTraces> runs;
  runs.reserve(realizations);
  for (int i = 0; i < realizations; ++i)
    runs.push_back(run_realization(cell, sensors, base_seed, i));
  return aggregate(cell, runs);
}

using CellProgress = std::function<void(const CellConfig&, std::size_t done, std::size_t total)>;

// Cross-product execution in canonical order (trajectory, density,
// frequency, qz).  Cells are independent; with jobs > 1 they run
// concurrently and the output is identical to a serial run.
inline std::vector<ResultRow> full_grid(const ExperimentConfig& cfg, int jobs = 1,
                                        const CellProgress& progress = {}) {
  const std::vector<CellConfig> cells = cfg.cells();
  std::vector<std::vector<ResultRow>> per_cell(cells.size());

  if (jobs <= 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      per_cell[c] = run_cell(cells[c], cfg.sensors, cfg.base_seed, cfg.realizations);
      if (progress) progress(cells[c], c + 1, cells.size());
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&]() {
      for (std::size_t c = next.fetch_add(1); c < cells.size(); c = next.fetch_add(1)) {
        per_cell[c] = run_cell(cells[c], cfg.sensors, cfg.base_seed, cfg.realizations);
        const std::size_t d = ++done;
        if (progress) {
          std::lock_guard<std::mutex> lock(progress_mutex);
          progress(cells[c], d, cells.size());
        }
      }
    };
    std::vector<std::future<void>> futures;
    for (int j = 0; j < jobs; ++j) futures.push_back(std::async(std::launch::async, worker));
    for (auto& f : futures) f.get();
  }

  std::vector<ResultRow> rows;
  for (auto& cell_rows : per_cell)
    for (auto& row : cell_rows) rows.push_back(std::move(row));
  return rows;
}

}  // namespace rekf
