#include <catch2/catch_amalgamated.hpp>

#include "rekf/experiment.hpp"

using namespace rekf;
using Catch::Approx;

TEST_CASE("paper grid enumerates 36 cells in canonical order") {
  const ExperimentConfig cfg;
  const auto cells = cfg.cells();
  REQUIRE(cells.size() == 36);
  // Canonical order: trajectory, then density, then frequency, then qz.
  CHECK(cells[0].trajectory == TrajectoryKind::Line);
  CHECK(cells[0].density == DensityTier::Low);
  CHECK(cells[0].frequency == 10.0);
  CHECK(cells[0].qz == 1e-4);
  CHECK(cells[1].qz == 2e-4);
  CHECK(cells[3].frequency == 20.0);
  CHECK(cells[6].density == DensityTier::High);
  CHECK(cells[12].trajectory == TrajectoryKind::Circle);
  CHECK(cells[35].trajectory == TrajectoryKind::General);
  CHECK(cells[35].qz == 4e-4);

  ExperimentConfig empty;
  empty.trajectories.clear();
  CHECK(empty.cells().empty());
  CHECK(full_grid(empty).empty());
}

TEST_CASE("cell keys are stable identities") {
  const CellConfig a{TrajectoryKind::Circle, DensityTier::Low, 10.0, 1e-4};
  const CellConfig b{TrajectoryKind::Circle, DensityTier::Low, 10.0, 2e-4};
  CHECK(cell_key(a) == "circle|low|10|0.0001");
  CHECK(cell_key(a) != cell_key(b));
}

TEST_CASE("visible-count targets follow the tables") {
  CHECK(visible_target(TrajectoryKind::Line, DensityTier::Low) == 20.0);
  CHECK(visible_target(TrajectoryKind::Line, DensityTier::High) == 40.0);
  CHECK(visible_target(TrajectoryKind::Circle, DensityTier::Low) == 20.0);
  CHECK(visible_target(TrajectoryKind::General, DensityTier::Low) == 25.0);
  CHECK(visible_target(TrajectoryKind::General, DensityTier::High) == 50.0);
}

TEST_CASE("aggregate averages over steps then realizations") {
  const CellConfig cell;
  std::vector<RealizationTraces> runs(2);
  // Hand-built two-step traces.
  runs[0].ekf.t = {0.1, 0.2};
  runs[0].ekf.dp = {1.0, 3.0};   // mean 2.0
  runs[0].ekf.dth = {0.1, 0.3};  // mean 0.2
  runs[1].ekf.t = {0.1, 0.2};
  runs[1].ekf.dp = {3.0, 5.0};   // mean 4.0
  runs[1].ekf.dth = {0.3, 0.5};  // mean 0.4
  for (auto& run : runs) {
    run.fej = run.ekf;
    run.reduced = run.ekf;
  }

  const auto rows = aggregate(cell, runs);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].method == "ekf");
  CHECK(rows[1].method == "fej");
  CHECK(rows[2].method == "reduced");
  for (const auto& row : rows) {
    CHECK(row.mean_dp == Approx(3.0));     // (2 + 4) / 2
    CHECK(row.mean_dth == Approx(0.3));    // (0.2 + 0.4) / 2
    CHECK(row.n_ok == 2);
    CHECK(row.n_diverged == 0);
  }

  // A single realization reproduces its own trace means.
  const auto single = aggregate(cell, {runs[0]});
  CHECK(single[0].mean_dp == Approx(2.0));
  CHECK(single[0].mean_dth == Approx(0.2));
}

TEST_CASE("aggregate flags diverged realizations and excludes them") {
  const CellConfig cell;
  std::vector<RealizationTraces> runs(2);
  runs[0].ekf.t = {0.1};
  runs[0].ekf.dp = {1.0};
  runs[0].ekf.dth = {0.1};
  runs[0].fej = runs[0].ekf;
  runs[0].reduced = runs[0].ekf;
  runs[1] = runs[0];
  runs[1].fej.diverged = true;

  const auto rows = aggregate(cell, runs);
  CHECK(rows[0].n_ok == 2);
  CHECK(rows[1].n_ok == 1);
  CHECK(rows[1].n_diverged == 1);
  CHECK(rows[1].mean_dp == Approx(1.0));

  // All realizations diverged: explicit failure.
  for (auto& run : runs) {
    run.ekf.diverged = true;
    run.fej.diverged = true;
    run.reduced.diverged = true;
  }
  CHECK_THROWS_AS(aggregate(cell, runs), std::runtime_error);
}

TEST_CASE("zero-noise realization tracks the truth") {
  CellConfig cell;
  cell.trajectory = TrajectoryKind::Line;
  cell.frequency = 10.0;
  cell.qz = 0.0;
  SensorParams sensors;
  sensors.qv.setZero();
  sensors.qw = 0.0;

  const auto traces = run_realization(cell, sensors, 7, 0);
  REQUIRE(traces.ekf.dp.size() == 600);
  REQUIRE(traces.fej.dp.size() == 600);
  REQUIRE(traces.reduced.dp.size() == 600);
  for (const auto* tr : {&traces.ekf, &traces.fej, &traces.reduced}) {
    CHECK(!tr->diverged);
    CHECK(tr->mean_dp() < 1e-3);
    CHECK(tr->mean_dth() < 1e-3);
  }
}

TEST_CASE("realizations are deterministic in (cell, seed)") {
  CellConfig cell;
  cell.trajectory = TrajectoryKind::General;
  cell.frequency = 10.0;
  cell.qz = 1e-4;
  const SensorParams sensors;

  const auto a = run_realization(cell, sensors, 42, 3);
  const auto b = run_realization(cell, sensors, 42, 3);
  REQUIRE(a.ekf.dp.size() == b.ekf.dp.size());
  CHECK(a.ekf.dp == b.ekf.dp);
  CHECK(a.fej.dp == b.fej.dp);
  CHECK(a.reduced.dp == b.reduced.dp);
  CHECK(a.reduced.dth == b.reduced.dth);

  // A different realization index gives a different stream.
  const auto c = run_realization(cell, sensors, 42, 4);
  CHECK(a.ekf.dp != c.ekf.dp);
}
