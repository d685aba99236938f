#pragma once

// Configuration files, CSV emission, the results table renderer, and the
// subcommand entry points behind the CLI.
//
// Config format: flat text with [section] headers and key = value lines;
// '#' starts a comment.  All numeric CSV output uses 6 significant digits.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekf/experiment.hpp"
#include "rekf/scenario.hpp"

namespace rekf {

inline constexpr const char* kToolVersion = "rekf 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  static Config parse(std::istream& is, const std::string& name) {
    Config cfg;
    cfg.name_ = name;
    std::string line, section;
    int line_no = 0;
    std::ostringstream echo;
    while (std::getline(is, line)) {
      ++line_no;
      echo << line << "\n";
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ConfigError(name + ":" + std::to_string(line_no) + ": malformed section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ":" + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[section + "/" + key] = value;
    }
    cfg.echo_ = echo.str();
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    return parse(is, path);
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    auto it = values_.find(section + "/" + key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& section, const std::string& key) const {
    auto v = get(section, key);
    if (!v)
      throw ConfigError(name_ + ": missing required key '" + key + "' in section [" + section + "]");
    return *v;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = get(section, key);
    return v ? parse_double(section, key, *v) : fallback;
  }

  std::uint64_t get_uint(const std::string& section, const std::string& key,
                         std::uint64_t fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    try {
      return std::stoull(*v);
    } catch (const std::exception&) {
      throw ConfigError(name_ + ": value for '" + key + "' is not an integer: " + *v);
    }
  }

  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const {
    auto v = get(section, key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::istringstream is(*v);
    std::string item;
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  const std::string& echo() const { return echo_; }
  const std::string& name() const { return name_; }

  double parse_double(const std::string& section, const std::string& key,
                      const std::string& value) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
      return d;
    } catch (const std::exception&) {
      throw ConfigError(name_ + ": value for '" + key + "' in [" + section +
                        "] is not a number: " + value);
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::string name_;
  std::string echo_;
  std::map<std::string, std::string> values_;
};

inline TrajectoryKind trajectory_from_string(const std::string& s) {
  if (s == "line") return TrajectoryKind::Line;
  if (s == "circle") return TrajectoryKind::Circle;
  if (s == "general") return TrajectoryKind::General;
  throw ConfigError("unknown trajectory '" + s + "' (expected line, circle, or general)");
}

inline DensityTier density_from_string(const std::string& s) {
  if (s == "low") return DensityTier::Low;
  if (s == "high") return DensityTier::High;
  throw ConfigError("unknown density '" + s + "' (expected low or high)");
}

inline SensorParams sensors_from_config(const Config& cfg) {
  SensorParams sp;
  const double qv = cfg.get_double("sensors", "qv", sp.qv(0, 0));
  sp.qv = Eigen::Matrix2d::Identity() * qv;
  sp.qw = cfg.get_double("sensors", "qw", sp.qw);
  sp.robot_diameter = cfg.get_double("sensors", "robot_diameter", sp.robot_diameter);
  sp.fov = cfg.get_double("sensors", "fov_deg", sp.fov * 180.0 / kPi) * kPi / 180.0;
  sp.max_range = cfg.get_double("sensors", "max_range", sp.max_range);
  sp.corridor_halfwidth = cfg.get_double("sensors", "corridor_halfwidth", sp.corridor_halfwidth);
  return sp;
}

inline ExperimentConfig experiment_from_config(const Config& cfg) {
  ExperimentConfig ec;
  ec.sensors = sensors_from_config(cfg);

  std::vector<std::string> trajs =
      cfg.get_list("experiment", "trajectories", {"line", "circle", "general"});
  ec.trajectories.clear();
  for (const auto& t : trajs) ec.trajectories.push_back(trajectory_from_string(t));

  std::vector<std::string> dens = cfg.get_list("experiment", "densities", {"low", "high"});
  ec.densities.clear();
  for (const auto& d : dens) ec.densities.push_back(density_from_string(d));

  std::vector<std::string> freqs = cfg.get_list("experiment", "frequencies", {"10", "20"});
  ec.frequencies.clear();
  for (const auto& f : freqs) ec.frequencies.push_back(cfg.parse_double("experiment", "frequencies", f));

  std::vector<std::string> qzs = cfg.get_list("experiment", "qz", {"1e-4", "2e-4", "4e-4"});
  ec.qz_values.clear();
  for (const auto& q : qzs) ec.qz_values.push_back(cfg.parse_double("experiment", "qz", q));

  ec.realizations = static_cast<int>(cfg.get_uint("experiment", "realizations", 20));
  if (ec.realizations < 1) throw ConfigError("experiment: realizations must be >= 1");
  ec.base_seed = cfg.get_uint("experiment", "base_seed", 0);
  return ec;
}

// The scenario cell used by `simulate`.  Only the trajectory kind is
// required; everything else has the paper defaults.
inline CellConfig simulate_cell_from_config(const Config& cfg) {
  CellConfig cell;
  cell.trajectory = trajectory_from_string(cfg.require("scenario", "trajectory"));
  cell.density = density_from_string(cfg.get("scenario", "density").value_or("low"));
  cell.frequency = cfg.get_double("scenario", "frequency", 10.0);
  cell.qz = cfg.get_double("scenario", "qz", 1e-4);
  return cell;
}

// 6 significant digits everywhere in CSV output.
inline std::string fmt_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& os, const RealizationTraces& traces) {
  os << "t,ekf_dp,ekf_dth,fej_dp,fej_dth,red_dp,red_dth\n";
  const std::size_t rows =
      std::max({traces.ekf.t.size(), traces.fej.t.size(), traces.reduced.t.size()});
  auto cell = [](const std::vector<double>& v, std::size_t k) {
    return k < v.size() ? fmt_g6(v[k]) : std::string("nan");
  };
  for (std::size_t k = 0; k < rows; ++k) {
    const std::vector<double>& t = traces.ekf.t.size() == rows ? traces.ekf.t
                                   : traces.fej.t.size() == rows ? traces.fej.t
                                                                 : traces.reduced.t;
    os << fmt_g6(t[k]) << "," << cell(traces.ekf.dp, k) << "," << cell(traces.ekf.dth, k) << ","
       << cell(traces.fej.dp, k) << "," << cell(traces.fej.dth, k) << ","
       << cell(traces.reduced.dp, k) << "," << cell(traces.reduced.dth, k) << "\n";
  }
}

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "trajectory,density,freq_hz,qz,method,mean_dp_m,mean_dth_rad,n_ok,n_diverged\n";
  for (const auto& r : rows)
    os << to_string(r.cell.trajectory) << "," << to_string(r.cell.density) << ","
       << fmt_g6(r.cell.frequency) << "," << fmt_g6(r.cell.qz) << "," << r.method << ","
       << fmt_g6(r.mean_dp) << "," << fmt_g6(r.mean_dth) << "," << r.n_ok << ","
       << r.n_diverged << "\n";
}

// A parsed results row; numeric fields keep their original text so the table
// renderer reproduces CSV values verbatim.
struct ResultRecord {
  std::string trajectory, density, freq, qz, method, dp, dth, n_ok, n_diverged;
};

inline std::vector<ResultRecord> read_results_csv(std::istream& is) {
  std::vector<ResultRecord> out;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string f;
    while (std::getline(row, f, ',')) fields.push_back(f);
    if (header) {
      if (fields.size() != 9 || fields[0] != "trajectory")
        throw std::runtime_error("results csv: unexpected header on line 1");
      header = false;
      continue;
    }
    if (fields.size() != 9)
      throw std::runtime_error("results csv: line " + std::to_string(line_no) +
                               ": expected 9 fields, got " + std::to_string(fields.size()));
    out.push_back(ResultRecord{fields[0], fields[1], fields[2], fields[3], fields[4], fields[5],
                               fields[6], fields[7], fields[8]});
  }
  return out;
}

// Renders the paper-style blocks: one block per (trajectory, density),
// column groups per (frequency, method), one row per qz value.
inline std::string render_table(const std::vector<ResultRecord>& records) {
  if (records.empty()) return "";
  auto uniq = [](std::vector<std::string> v) {
    std::vector<std::string> out;
    for (auto& s : v)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    return out;
  };
  std::vector<std::string> trajs, dens, freqs, qzs;
  for (const auto& r : records) {
    trajs.push_back(r.trajectory);
    dens.push_back(r.density);
    freqs.push_back(r.freq);
    qzs.push_back(r.qz);
  }
  trajs = uniq(trajs);
  dens = uniq(dens);
  freqs = uniq(freqs);
  std::sort(freqs.begin(), freqs.end(),
            [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  qzs = uniq(qzs);
  std::sort(qzs.begin(), qzs.end(),
            [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
  const std::vector<std::string> methods = {"ekf", "fej", "reduced"};

  auto find = [&](const std::string& traj, const std::string& den, const std::string& freq,
                  const std::string& qz, const std::string& method) -> const ResultRecord* {
    for (const auto& r : records)
      if (r.trajectory == traj && r.density == den && r.freq == freq && r.qz == qz &&
          r.method == method)
        return &r;
    return nullptr;
  };

  std::ostringstream os;
  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  const std::size_t w = 11;
  for (const auto& traj : trajs) {
    for (const auto& den : dens) {
      bool any = false;
      for (const auto& r : records)
        if (r.trajectory == traj && r.density == den) any = true;
      if (!any) continue;
      os << "== average error: " << traj << " trajectory, " << den << " density ==\n";
      os << pad("", 10);
      for (const auto& freq : freqs)
        for (const auto& m : methods) {
          os << pad(freq + "Hz " + m, 2 * w);
        }
      os << "\n" << pad("qz", 10);
      for (std::size_t i = 0; i < freqs.size() * methods.size(); ++i)
        os << pad("dp", w) << pad("dth", w);
      os << "\n";
      for (const auto& qz : qzs) {
        os << pad(qz, 10);
        for (const auto& freq : freqs)
          for (const auto& m : methods) {
            const ResultRecord* r = find(traj, den, freq, qz, m);
            os << pad(r ? r->dp : "-", w) << pad(r ? r->dth : "-", w);
          }
        os << "\n";
      }
      os << "\n";
    }
  }
  return os.str();
}

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  std::uint64_t base_seed = 0;
  std::string created_utc;
  std::vector<std::pair<std::string, std::string>> cell_status;
  std::string config_echo;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline void write_manifest(std::ostream& os, const RunManifest& m) {
  os << "[manifest]\n";
  os << "tool = " << m.tool_version << "\n";
  os << "command = " << m.command << "\n";
  os << "base_seed = " << m.base_seed << "\n";
  os << "created_utc = " << m.created_utc << "\n";
  if (!m.cell_status.empty()) {
    os << "\n[cells]\n";
    for (const auto& [key, status] : m.cell_status) os << key << " = " << status << "\n";
  }
  os << "\n[config_echo]\n";
  std::istringstream echo(m.config_echo);
  std::string line;
  while (std::getline(echo, line)) os << "| " << line << "\n";
}

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
  return os;
}
}  // namespace detail

// simulate: one scenario, one realization, all three filters; writes
// trace.csv, scenario.txt, and manifest.txt into the output directory.
inline void cmd_simulate(const std::string& config_path, std::uint64_t seed,
                         const std::string& out_dir) {
  const Config cfg = Config::parse_file(config_path);
  const CellConfig cell = simulate_cell_from_config(cfg);
  const SensorParams sensors = sensors_from_config(cfg);

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  const Scenario sc = build_scenario(cell, sensors, seed, 0);
  {
    auto os = detail::open_output(dir, "scenario.txt");
    save_scenario(os, sc);
  }
  const RealizationTraces traces = run_realization(cell, sensors, seed, 0);
  {
    auto os = detail::open_output(dir, "trace.csv");
    write_trace_csv(os, traces);
  }
  RunManifest manifest;
  manifest.command = "simulate";
  manifest.base_seed = seed;
  manifest.created_utc = utc_timestamp();
  manifest.config_echo = cfg.echo();
  manifest.cell_status.emplace_back(cell_key(cell), traces.ekf.diverged || traces.fej.diverged ||
                                                            traces.reduced.diverged
                                                        ? "diverged"
                                                        : "ok");
  auto os = detail::open_output(dir, "manifest.txt");
  write_manifest(os, manifest);
}

// experiment: the full configured grid; writes results.csv and manifest.txt.
inline void cmd_experiment(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                           const std::string& out_dir, int jobs,
                           std::ostream* progress_out = nullptr) {
  const Config cfg = Config::parse_file(config_path);
  ExperimentConfig ec = experiment_from_config(cfg);
  if (seed_override) ec.base_seed = *seed_override;

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);

  CellProgress progress;
  if (progress_out) {
    progress = [progress_out](const CellConfig& cell, std::size_t done, std::size_t total) {
      (*progress_out) << "[" << done << "/" << total << "] " << cell_key(cell) << "\n";
      progress_out->flush();
    };
  }
  const std::vector<ResultRow> rows = full_grid(ec, jobs, progress);
  {
    auto os = detail::open_output(dir, "results.csv");
    write_results_csv(os, rows);
  }

  RunManifest manifest;
  manifest.command = "experiment";
  manifest.base_seed = ec.base_seed;
  manifest.created_utc = utc_timestamp();
  manifest.config_echo = cfg.echo();
  for (const auto& cell : ec.cells()) {
    int diverged = 0;
    for (const auto& row : rows)
      if (cell_key(row.cell) == cell_key(cell)) diverged += row.n_diverged;
    manifest.cell_status.emplace_back(cell_key(cell),
                                      diverged == 0 ? "ok" : std::to_string(diverged) + " diverged");
  }
  auto os = detail::open_output(dir, "manifest.txt");
  write_manifest(os, manifest);
}

// table: renders a results CSV as paper-style text blocks.
inline void cmd_table(const std::string& csv_path, std::ostream& out) {
  std::ifstream is(csv_path);
  if (!is) throw std::runtime_error("cannot open " + csv_path);
  out << render_table(read_results_csv(is));
}

}  // namespace rekf
