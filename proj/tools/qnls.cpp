#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qnls/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification toolkit for quadratic NLS systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> model, out;
  std::optional<int> dim, points;
  std::optional<double> extent, dt, t_end;
  std::optional<std::uint64_t> seed;

  for (const char* name : {"validate", "groundstate", "evolve", "virial", "threshold", "blowup", "stability",
                           "scaling-law"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value config file with [model] [grid] [evolve] [groundstate] [output]")
        ->check(CLI::ExistingFile);
    sub->add_option("--model", model, "builtin model")->check(CLI::IsMember({"shg3", "cascade3", "uv2"}));
    sub->add_option("--dim", dim, "space dimension");
    sub->add_option("--points", points, "grid points (per axis)");
    sub->add_option("--extent", extent, "half-width (cartesian) or radius (radial)");
    sub->add_option("--dt", dt, "time step");
    sub->add_option("--t-end", t_end, "evolution time");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "sampling seed");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const auto scenario = qnls::scenario_from_string(app.get_subcommands().front()->get_name());
    qnls::ExperimentConfig cfg;
    if (!config_path.empty())
      cfg = qnls::load_config(config_path, scenario);
    else
      cfg.scenario = scenario;
    if (model) {
      cfg.model = *model;
      cfg.model_file.reset();
    }
    if (dim) cfg.dim = *dim;
    if (points) cfg.points = *points;
    if (extent) cfg.extent = *extent;
    if (dt) cfg.evolve.dt = *dt;
    if (t_end) cfg.evolve.t_end = *t_end;
    if (out) cfg.out_dir = *out;
    if (seed) cfg.seed = *seed;

    const auto report = qnls::run_experiment(cfg);
    std::cout << report.text();
    return report.all_pass() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "qnls: " << e.what() << "\n";
    return 2;
  }
}
