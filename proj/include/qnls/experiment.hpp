#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnls/evolve.hpp"
#include "qnls/groundstate.hpp"

namespace qnls {

enum class Scenario { Validate, GroundState, Evolve, Virial, Threshold, Blowup, Stability, ScalingLaw };
const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

struct ExperimentConfig {
  Scenario scenario = Scenario::Validate;

  // [model]
  std::string model = "shg3";
  std::optional<std::filesystem::path> model_file;
  ModelParams params;

  // [grid]; kind "auto" means cartesian for n = 1, radial otherwise
  std::string grid_kind = "auto";
  int dim = 1;
  int points = 512;
  double extent = 30;

  // [evolve]
  EvolveConfig evolve;
  std::string initial = "gaussian";  // gaussian | ground
  double amplitude = 1;
  double width = 1;
  double chirp = 0;  // gaussian data times exp(-i chirp |x|^2)
  bool confirm = false;  // threshold: confirm the classification by evolution

  // [groundstate]
  double omega = 1;
  GroundStateOptions groundstate;
  std::optional<std::filesystem::path> archive;
  double c = 0.9;             // threshold: data c psi
  double eps = 0.1;           // blowup, n = 4: (1 + eps) psi
  double lambda = 1.5;        // blowup, n = 5: psi^lambda
  double blowup_T = 1;        // blowup, n = 4: pseudo-conformal blow-up time
  double nu = 1;              // scaling-law
  double perturbation = 1e-3; // stability

  // [output]
  std::filesystem::path out_dir = "qnls_out";

  std::uint64_t seed = 0;
  int samples = 1000;

  GridSpec grid() const;
  ModelSpec make_model() const;
  // Every key with its current value, in file order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

// Applies "section.key = value"; throws on unknown keys or malformed values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig parse_config(std::istream& in, Scenario scenario);
ExperimentConfig load_config(const std::filesystem::path& path, Scenario scenario);

struct Criterion {
  std::string name;
  double measured = 0;
  std::string expected;
  std::string provenance;
  double tolerance = 0;
  bool pass = false;
};

struct ExperimentReport {
  Scenario scenario = Scenario::Validate;
  std::vector<Criterion> criteria;
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::filesystem::path> manifest;

  bool all_pass() const;
  void add(std::string name, double measured, std::string expected, std::string provenance, double tolerance,
           bool pass);
  // measured <= tolerance
  void add_below(std::string name, double measured, double tolerance, std::string provenance);
  std::string text() const;
  std::string json() const;
};

ExperimentReport cmd_validate(const ExperimentConfig& cfg);
ExperimentReport cmd_groundstate(const ExperimentConfig& cfg);
ExperimentReport cmd_evolve(const ExperimentConfig& cfg);
ExperimentReport cmd_virial(const ExperimentConfig& cfg);
ExperimentReport cmd_threshold(const ExperimentConfig& cfg);
ExperimentReport cmd_blowup(const ExperimentConfig& cfg);
ExperimentReport cmd_stability(const ExperimentConfig& cfg);
ExperimentReport cmd_scaling_law(const ExperimentConfig& cfg);

// Dispatches on cfg.scenario, then writes report.txt and report.json into cfg.out_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace qnls
