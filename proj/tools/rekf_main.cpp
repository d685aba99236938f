// Command-line front end: simulate | experiment | table.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rekf/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rekf: planar SLAM filter workbench (classical, first-estimate, reduced EKF)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string csv_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;

  auto* sim = app.add_subcommand("simulate", "Run one scenario and write per-filter error traces");
  sim->add_option("--config", config_path, "Config file path")->required();
  sim->add_option("--seed", seed, "Realization seed")->each([&](const std::string&) { seed_given = true; });
  sim->add_option("--out", out_dir, "Output directory");

  auto* exp = app.add_subcommand("experiment", "Run the Monte Carlo grid and write results.csv");
  exp->add_option("--config", config_path, "Config file path")->required();
  exp->add_option("--seed", seed, "Override the config base_seed")->each([&](const std::string&) { seed_given = true; });
  exp->add_option("--out", out_dir, "Output directory");
  exp->add_option("--jobs", jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  auto* tab = app.add_subcommand("table", "Render a results CSV as paper-style text tables");
  tab->add_option("csv", csv_path, "results.csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (sim->parsed()) {
      rekf::cmd_simulate(config_path, seed, out_dir);
    } else if (exp->parsed()) {
      std::optional<std::uint64_t> seed_override;
      if (seed_given) seed_override = seed;
      rekf::cmd_experiment(config_path, seed_override, out_dir, jobs, &std::cerr);
    } else if (tab->parsed()) {
      rekf::cmd_table(csv_path, std::cout);
    }
  } catch (const rekf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
