#pragma once

// Command-line front end: configuration files, output writers and the run/sweep commands.

#include "healsim/scenarios.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace healsim::cli {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_io = 4 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ParameterSet params;
  std::string output_dir = "out";
  std::string output_dir_provenance = "default";
  std::vector<double> snapshot_times;  // empty: end of loading and end of run
  std::string snapshot_provenance = "default";
  std::uint64_t seed = 0;
  std::string seed_provenance = "default";
};

// ---------------------------------------------------------------------------
// Number formatting (locale independent)

/// Shortest representation that reads back to the same double.
inline std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// 17 significant digits, as written to CSV files.
inline std::string format_csv(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(what + ": empty entry in '" + text + "'");
    item = item.substr(b, e - b + 1);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

struct Entry {
  std::string key;
  YAML::Node value;
  int line = 0;
};

inline void flatten(const YAML::Node& node, const std::string& prefix, std::vector<Entry>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const int line = it->first.Mark().line + 1;
    if (!it->first.IsScalar()) throw ConfigError("line " + std::to_string(line) + ": keys must be plain names");
    const std::string key = prefix.empty() ? it->first.Scalar() : prefix + "." + it->first.Scalar();
    if (it->second.IsMap()) {
      flatten(it->second, key, out);
    } else {
      out.push_back({key, it->second, line});
    }
  }
}

inline std::string at_line(int line, const std::string& msg) { return "line " + std::to_string(line) + ": " + msg; }

inline std::string scalar_of(const Entry& e) {
  if (e.value.IsNull()) throw ConfigError(at_line(e.line, "'" + e.key + "' has no value"));
  if (!e.value.IsScalar()) throw ConfigError(at_line(e.line, "'" + e.key + "' expects a single value"));
  return e.value.Scalar();
}

}  // namespace detail

/// Parses a YAML configuration. Nested sections and dotted keys are equivalent
/// ("healing: {M_rm: 0.05}" is "healing.M_rm: 0.05"). Every key must exist in the
/// scenario's parameter table. `scenario` (e.g. from a command-line flag) selects the
/// scenario when the file does not.
inline RunConfig parse_config(const std::string& text, const std::string& scenario = {}) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(detail::at_line(e.mark.line + 1, "syntax error: " + e.msg));
  }
  std::vector<detail::Entry> entries;
  if (root.IsMap()) {
    detail::flatten(root, "", entries);
  } else if (!root.IsNull()) {
    throw ConfigError(detail::at_line(root.Mark().line + 1, "the configuration must be a mapping of keys to values"));
  }

  std::set<std::string> seen;
  for (const auto& e : entries)
    if (!seen.insert(e.key).second) throw ConfigError(detail::at_line(e.line, "duplicate key '" + e.key + "'"));

  std::string name = scenario;
  for (const auto& e : entries) {
    if (e.key != "scenario") continue;
    const std::string v = detail::scalar_of(e);
    if (!name.empty() && name != v) {
      throw ConfigError(detail::at_line(e.line, "scenario '" + v + "' conflicts with the requested scenario '" + name + "'"));
    }
    name = v;
  }
  if (name.empty()) throw ConfigError("no scenario given (set 'scenario' in the file or pass --scenario)");

  RunConfig cfg;
  cfg.params = default_parameters(scenario_kind(name));
  for (const auto& e : entries) {
    try {
      if (e.key == "scenario") continue;
      if (e.key == "output.dir") {
        cfg.output_dir = detail::scalar_of(e);
        cfg.output_dir_provenance = "user";
      } else if (e.key == "output.snapshot_times") {
        std::vector<double> times;
        if (e.value.IsSequence()) {
          for (const auto& v : e.value) {
            if (!v.IsScalar()) throw ConfigError("output.snapshot_times must be a list of numbers");
            const auto one = parse_number_list(v.Scalar(), "output.snapshot_times");
            times.insert(times.end(), one.begin(), one.end());
          }
        } else {
          times = parse_number_list(detail::scalar_of(e), "output.snapshot_times");
        }
        for (double t : times)
          if (t < 0.0) throw ConfigError("output.snapshot_times must be non-negative");
        std::sort(times.begin(), times.end());
        cfg.snapshot_times = times;
        cfg.snapshot_provenance = "user";
      } else if (e.key == "seed") {
        const std::string v = detail::scalar_of(e);
        std::uint64_t s = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), s);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("seed must be a non-negative integer");
        cfg.seed = s;
        cfg.seed_provenance = "user";
      } else {
        if (!cfg.params.has(e.key)) throw ConfigError(cfg.params.unknown_key_message(e.key));
        cfg.params.set_text(e.key, detail::scalar_of(e), "user");
      }
    } catch (const ConfigError& err) {
      const std::string msg = err.what();
      throw ConfigError(msg.rfind("line ", 0) == 0 ? msg : detail::at_line(e.line, msg));
    }
  }
  return cfg;
}

/// Applies a "key=value" override, e.g. from --set or a sweep grid point.
inline void apply_override(RunConfig& cfg, const std::string& key, const std::string& value,
                           const std::string& provenance) {
  if (key == "scenario") {
    if (value != cfg.params.text("scenario")) throw ConfigError("the scenario cannot be overridden");
  } else if (key == "output.dir") {
    cfg.output_dir = value;
    cfg.output_dir_provenance = provenance;
  } else if (key == "output.snapshot_times") {
    cfg.snapshot_times = parse_number_list(value, key);
    std::sort(cfg.snapshot_times.begin(), cfg.snapshot_times.end());
    cfg.snapshot_provenance = provenance;
  } else {
    if (!cfg.params.has(key)) throw ConfigError(cfg.params.unknown_key_message(key));
    cfg.params.set_text(key, value, provenance);
  }
}

/// The full effective configuration as YAML, one dotted key per line with its provenance.
/// The text parses back into the same configuration.
inline std::string effective_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# Effective configuration. Comments give each value's origin: 'user' (configuration file),\n"
        "# 'command line', 'sweep', 'default' (built-in choice), or the source table or example.\n";
  for (const Parameter& p : cfg.params.entries()) {
    os << p.key << ": " << (p.type == Parameter::Type::text ? p.text : format_shortest(p.number)) << "  # "
       << p.provenance;
    if (!p.description.empty()) os << "; " << p.description;
    os << "\n";
  }
  os << "output.dir: \"" << cfg.output_dir << "\"  # " << cfg.output_dir_provenance << "\n";
  os << "output.snapshot_times: [";
  for (std::size_t i = 0; i < cfg.snapshot_times.size(); ++i) os << (i ? ", " : "") << format_shortest(cfg.snapshot_times[i]);
  os << "]  # " << cfg.snapshot_provenance << (cfg.snapshot_times.empty() ? "; end of loading and end of run" : "") << "\n";
  os << "seed: " << cfg.seed << "  # " << cfg.seed_provenance << "; not used by the physics\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Output files

inline void write_csv(std::ostream& os, const TimeSeries& series) {
  for (std::size_t i = 0; i < series.names.size(); ++i) os << (i ? "," : "") << series.names[i];
  os << "\n";
  for (const auto& row : series.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_csv(row[i]);
    os << "\n";
  }
}

/// Legacy ASCII VTK unstructured grid: element-averaged internal variables as cell data,
/// displacement and the nonlocal damage field as point data.
inline void write_vtk(std::ostream& os, const fem::Simulation& sim, const std::string& title) {
  const fem::Mesh& mesh = sim.problem().model.mesh;
  const Eigen::VectorXd& u = sim.fields();
  const int nn = mesh.num_nodes(), ne = mesh.num_elements();
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nn << " double\n";
  for (const Vec2& x : mesh.nodes) os << format_csv(x.x()) << " " << format_csv(x.y()) << " 0\n";
  os << "CELLS " << ne << " " << 5 * ne << "\n";
  for (const auto& e : mesh.elements) os << "4 " << e[0] << " " << e[1] << " " << e[2] << " " << e[3] << "\n";
  os << "CELL_TYPES " << ne << "\n";
  for (int e = 0; e < ne; ++e) os << "9\n";

  enum { h, lambda, jg1, jg2, d, count };
  std::vector<std::array<double, count>> cell(ne, std::array<double, count>{});
  std::vector<double> weight(ne, 0.0);
  for (const auto& q : sim.points()) {
    auto& c = cell[q.element];
    c[h] += q.weight * healing_parameter(q.state);
    c[lambda] += q.weight * q.state.lambda;
    c[jg1] += q.weight * q.state.jg1;
    c[jg2] += q.weight * q.state.jg2;
    c[d] += q.weight * q.state.d;
    weight[q.element] += q.weight;
  }
  os << "CELL_DATA " << ne << "\n";
  os << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int e = 0; e < ne; ++e) os << mesh.region[e] << "\n";
  const char* names[count] = {"H", "lambda", "J_g1", "J_g2", "d"};
  for (int k = 0; k < count; ++k) {
    os << "SCALARS " << names[k] << " double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < ne; ++e) os << format_csv(cell[e][k] / weight[e]) << "\n";
  }
  os << "POINT_DATA " << nn << "\n";
  os << "VECTORS displacement double\n";
  for (int n = 0; n < nn; ++n) os << format_csv(u[fem::dof(n, 0)]) << " " << format_csv(u[fem::dof(n, 1)]) << " 0\n";
  os << "SCALARS phi double 1\nLOOKUP_TABLE default\n";
  for (int n = 0; n < nn; ++n) os << format_csv(u[fem::dof(n, 2)]) << "\n";
}

namespace detail {

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  return f;
}

inline void close_output(std::ofstream& f, const fs::path& path) {
  f.close();
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f = open_output(path);
  body(f);
  close_output(f, path);
}

inline std::string snapshot_name(double t) { return "snapshot_t" + format_shortest(t) + ".vtk"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Running

struct RunOutcome {
  int exit_code = exit_ok;
  std::string message;  // diagnostic on failure
  TimeSeries series;    // rows written so far
  double ramp_duration = 0.0;
  ScenarioKind kind = ScenarioKind::uniaxial;
};

/// Runs one configuration, writing effective_config.yaml, timeseries.csv, VTK snapshots and
/// run.log into `dir`. Never throws; failures are reported through the exit code.
inline RunOutcome execute(const RunConfig& cfg, const fs::path& dir) {
  RunOutcome out;
  std::ofstream log;
  const fs::path log_path = dir / "run.log";
  auto note = [&](const std::string& line) {
    if (log) log << line << "\n" << std::flush;
  };
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    log = detail::open_output(log_path);
    detail::write_file(dir / "effective_config.yaml", [&](std::ostream& os) { os << effective_config_text(cfg); });

    ScenarioSpec spec;
    try {
      spec = build_scenario(cfg.params);
    } catch (const std::domain_error& e) {
      throw ConfigError(e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    out.kind = spec.kind;
    out.ramp_duration = spec.problem.schedule.ramp_duration;
    out.series.names = channel_names(spec.kind);
    const fem::Mesh& mesh = spec.problem.model.mesh;
    note("scenario " + to_string(spec.kind) + ": " + std::to_string(mesh.num_elements()) + " elements, " +
         std::to_string(mesh.num_nodes()) + " nodes, " + std::to_string(spec.problem.prescribed.size()) +
         " prescribed dofs");
    note("dt " + format_shortest(spec.controls.dt) + " days, duration " + format_shortest(spec.controls.duration) +
         " days, load ramp " + format_shortest(out.ramp_duration) + " days");

    std::vector<double> snapshots = cfg.snapshot_times;
    if (snapshots.empty()) snapshots = {std::min(out.ramp_duration, spec.controls.duration), spec.controls.duration};
    std::size_t next_snapshot = 0;
    const double eps = 1e-9 * spec.controls.dt;
    const auto t0 = std::chrono::steady_clock::now();

    fem::Simulation sim(spec.problem, spec.controls, [&](const std::string& m) { note("  " + m); });
    bool captured = sim.captured();
    int decile = 0;
    auto observe = [&](const fem::Simulation& s) {
      out.series.rows.push_back(sample(spec, s));
      if (!captured && s.captured()) {
        captured = true;
        note("growth limits captured at t=" + format_shortest(s.capture_time()));
      }
      bool snap = false;
      while (next_snapshot < snapshots.size() && snapshots[next_snapshot] <= s.time() + eps) {
        snap = true;
        ++next_snapshot;
      }
      if (snap) {
        const std::string name = detail::snapshot_name(s.time());
        detail::write_file(dir / name, [&](std::ostream& os) {
          write_vtk(os, s, to_string(spec.kind) + " t=" + format_shortest(s.time()) + " days");
        });
        note("wrote " + name);
      }
      while (s.time() >= (decile + 1) * 0.1 * spec.controls.duration - eps && decile < 10) {
        ++decile;
        const auto& row = out.series.rows.back();
        note("t=" + format_shortest(s.time()) + " increment " + std::to_string(s.increment()) + " min H " +
             format_shortest(row[out.series.column("min_H")]));
      }
    };
    try {
      fem::time_march(sim, observe);
    } catch (...) {
      detail::write_file(dir / "timeseries.csv", [&](std::ostream& os) { write_csv(os, out.series); });
      throw;
    }
    detail::write_file(dir / "timeseries.csv", [&](std::ostream& os) { write_csv(os, out.series); });

    const fem::InvariantLog& inv = sim.invariants();
    note("finished: " + std::to_string(sim.increment()) + " increments, " + std::to_string(inv.subdivisions) +
         " subdivisions, at most " + std::to_string(inv.max_newton_iterations) + " Newton iterations");
    note("invariants: clamps " + std::to_string(inv.clamps) + ", unresolved growth " +
         std::to_string(inv.unresolved_growth) + ", damage decreases " + std::to_string(inv.damage_decreases) +
         ", lambda violations " + std::to_string(inv.lambda_violations) + ", H violations " +
         std::to_string(inv.healing_violations) + ", min dissipation increment " + format_shortest(inv.min_dissipation));
    if (!inv.clean()) note("WARNING: invariant violations recorded");
    note("wall time " + format_shortest(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
  } catch (const ConfigError& e) {
    out.exit_code = exit_config;
    out.message = std::string("configuration error: ") + e.what();
  } catch (const fem::SolverFailure& e) {
    out.exit_code = exit_solver;
    out.message = "solver failure at increment " + std::to_string(e.increment()) + " (t=" +
                  format_shortest(e.time()) + "): " + e.what();
  } catch (const fem::CaptureNotReached& e) {
    out.exit_code = exit_solver;
    out.message = std::string("run failure: ") + e.what();
  } catch (const IoError& e) {
    out.exit_code = exit_io;
    out.message = std::string("I/O error: ") + e.what();
  } catch (const fs::filesystem_error& e) {
    out.exit_code = exit_io;
    out.message = std::string("I/O error: ") + e.what();
  } catch (const std::exception& e) {
    out.exit_code = exit_solver;
    out.message = std::string("run failure: ") + e.what();
  }
  if (out.exit_code != exit_ok) note(out.message);
  return out;
}

/// Flags shared by `run` and `sweep`.
struct RunOptions {
  std::string config_path;  // empty: no file, defaults only
  std::string scenario;
  std::optional<std::string> out;
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<std::string> snapshot_times;
  std::vector<std::string> sets;  // key=value
};

inline std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const RunOptions& o) {
  const std::string text = o.config_path.empty() ? std::string() : read_file(o.config_path);
  RunConfig cfg;
  try {
    cfg = parse_config(text, o.scenario);
  } catch (const ConfigError& e) {
    throw ConfigError((o.config_path.empty() ? "" : o.config_path + ": ") + e.what());
  }
  const std::string src = "command line";
  for (const auto& s : o.sets) {
    const auto [k, v] = split_assignment(s);
    apply_override(cfg, k, v, src);
  }
  if (o.out) apply_override(cfg, "output.dir", *o.out, src);
  if (o.dt) cfg.params.set_number("time.dt", *o.dt, src);
  if (o.duration) cfg.params.set_number("time.duration", *o.duration, src);
  if (o.snapshot_times) apply_override(cfg, "output.snapshot_times", *o.snapshot_times, src);
  return cfg;
}

inline int cmd_run(const RunOptions& o, std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = load_config(o);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return exit_io;
  }
  const RunOutcome r = execute(cfg, cfg.output_dir);
  if (r.exit_code != exit_ok) err << r.message << "\n";
  return r.exit_code;
}

// ---------------------------------------------------------------------------
// Sweeps

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses "key=v1,v2,..." grid specifications.
inline std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs) {
  if (specs.empty()) throw ConfigError("empty parameter grid (pass --grid key=v1,v2,...)");
  std::vector<GridAxis> axes;
  for (const auto& s : specs) {
    const auto [key, list] = split_assignment(s);
    GridAxis a{key, {}};
    std::stringstream ss(list);
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) a.values.push_back(v);
    if (a.values.empty()) throw ConfigError("grid axis '" + key + "' has no values");
    for (const auto& b : axes)
      if (b.key == key) throw ConfigError("grid axis '" + key + "' given twice");
    axes.push_back(std::move(a));
  }
  return axes;
}

struct SweepPoint {
  std::vector<std::string> values;  // one per axis
  std::string dir;
  RunOutcome outcome;
};

/// Summary quantities of one finished run.
struct PointSummary {
  double homeostatic_stress = std::numeric_limits<double>::quiet_NaN();
  double final_h = std::numeric_limits<double>::quiet_NaN();
  double final_displacement = std::numeric_limits<double>::quiet_NaN();
  double time_to_h_plateau = std::numeric_limits<double>::quiet_NaN();
};

/// homeostatic_stress: final boundary stress sigma_x (uniaxial, open hole) or the mean captured
/// growth limit r_g1 (angioplasty). final_displacement: transverse edge displacement u_y
/// (uniaxial), node-A displacement uA_y (open hole) or normalized outer radius (angioplasty).
/// time_to_H_plateau: first time after loading at which min H has recovered 90% of its final
/// recovery; NaN when min H does not recover.
inline PointSummary summarize(const RunOutcome& r) {
  PointSummary s;
  if (r.series.rows.empty()) return s;
  const TimeSeries& ts = r.series;
  switch (r.kind) {
    case ScenarioKind::uniaxial:
      s.homeostatic_stress = ts.last("sigma_x");
      s.final_displacement = ts.last("u_y");
      break;
    case ScenarioKind::open_hole:
      s.homeostatic_stress = ts.last("sigma_x");
      s.final_displacement = ts.last("uA_y");
      break;
    case ScenarioKind::angioplasty:
      s.homeostatic_stress = ts.last("mean_rg1");
      s.final_displacement = ts.last("R_outer");
      break;
  }
  s.final_h = ts.last("min_H");
  const std::size_t t_col = ts.column("time"), h_col = ts.column("min_H");
  std::size_t post = 0;
  while (post < ts.rows.size() && ts.rows[post][t_col] < r.ramp_duration - 1e-9) ++post;
  if (post < ts.rows.size()) {
    const double h_post = ts.rows[post][h_col];
    const double recovery = s.final_h - h_post;
    if (recovery > 1e-9) {
      for (std::size_t i = post; i < ts.rows.size(); ++i)
        if (ts.rows[i][h_col] >= h_post + 0.9 * recovery) {
          s.time_to_h_plateau = ts.rows[i][t_col];
          break;
        }
    }
  }
  return s;
}

inline void write_summary(std::ostream& os, const std::vector<GridAxis>& axes, const std::vector<SweepPoint>& points) {
  os << "point";
  for (const auto& a : axes) os << "," << a.key;
  os << ",exit_code,homeostatic_stress,final_H,final_displacement,time_to_H_plateau\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    const PointSummary s = summarize(p.outcome);
    os << p.dir;
    for (const auto& v : p.values) os << "," << v;
    os << "," << p.outcome.exit_code << "," << format_csv(s.homeostatic_stress) << "," << format_csv(s.final_h) << ","
       << format_csv(s.final_displacement) << "," << format_csv(s.time_to_h_plateau) << "\n";
  }
}

/// Runs every point of the Cartesian product of the grid axes, up to `jobs` at a time, each in
/// its own subdirectory, then writes summary.csv. Returns the worst exit code.
inline int cmd_sweep(const RunOptions& o, const std::vector<std::string>& grid, int jobs, std::ostream& err = std::cerr) {
  RunConfig base;
  std::vector<GridAxis> axes;
  std::vector<SweepPoint> points;
  std::vector<RunConfig> configs;
  try {
    base = load_config(o);
    axes = parse_grid(grid);
    if (jobs < 1) throw ConfigError("--jobs must be at least 1");
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    for (std::size_t n = 0; n < total; ++n) {
      SweepPoint p;
      RunConfig cfg = base;
      std::size_t rest = n;
      for (std::size_t k = axes.size(); k-- > 0;) {
        const std::string& v = axes[k].values[rest % axes[k].values.size()];
        rest /= axes[k].values.size();
        p.values.insert(p.values.begin(), v);
        apply_override(cfg, axes[k].key, v, "sweep");
      }
      char name[32];
      std::snprintf(name, sizeof name, "point_%03zu", n);
      p.dir = name;
      cfg.output_dir = (fs::path(base.output_dir) / name).string();
      points.push_back(std::move(p));
      configs.push_back(std::move(cfg));
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return exit_io;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      points[i].outcome = execute(configs[i], configs[i].output_dir);
      if (points[i].outcome.exit_code != exit_ok) {
        std::lock_guard lock(err_mutex);
        err << points[i].dir << ": " << points[i].outcome.message << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = static_cast<int>(std::min<std::size_t>(jobs, points.size()));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = exit_ok;
  for (const auto& p : points) worst = std::max(worst, p.outcome.exit_code);
  try {
    detail::write_file(fs::path(base.output_dir) / "summary.csv", [&](std::ostream& os) { write_summary(os, axes, points); });
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return exit_io;
  }
  return worst;
}

}  // namespace healsim::cli
