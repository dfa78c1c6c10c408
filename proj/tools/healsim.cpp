// healsim: run the built-in damage/healing scenarios from YAML configurations.

#include "healsim/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_run_flags(CLI::App* app, healsim::cli::RunOptions& o) {
  app->add_option("config", o.config_path, "YAML configuration file (optional with --scenario)");
  app->add_option("--scenario", o.scenario, "scenario when the file does not name one")
      ->check(CLI::IsMember({"uniaxial", "open_hole", "angioplasty"}));
  app->add_option_function<std::string>("--out", [&o](const std::string& v) { o.out = v; }, "output directory");
  app->add_option_function<double>("--dt", [&o](double v) { o.dt = v; }, "time increment (days)");
  app->add_option_function<double>("--duration", [&o](double v) { o.duration = v; }, "simulated time (days)");
  app->add_option_function<std::string>("--snapshot-times", [&o](const std::string& v) { o.snapshot_times = v; },
                                        "comma-separated VTK snapshot times (days)");
  app->add_option("--set", o.sets, "override a configuration key, key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-strain damage and healing simulator for soft tissue"};
  app.require_subcommand(1);

  healsim::cli::RunOptions run_opts;
  CLI::App* run = app.add_subcommand("run", "run one configuration");
  add_run_flags(run, run_opts);

  healsim::cli::RunOptions sweep_opts;
  std::vector<std::string> grid;
  int jobs = 1;
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid and write summary.csv");
  add_run_flags(sweep, sweep_opts);
  sweep->add_option("--grid", grid, "grid axis key=v1,v2,... (repeatable; axes combine as a product)");
  sweep->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : healsim::cli::exit_config;
  }
  if (*run) return healsim::cli::cmd_run(run_opts);
  return healsim::cli::cmd_sweep(sweep_opts, grid, jobs);
}
