#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jdfilter/grid_zakai.hpp"
#include "jdfilter/particle_filter.hpp"

namespace jdf {

// Exit codes shared by run_experiment and the CLI.
enum ExitCode {
  kExitPass = 0,
  kExitTestFailure = 1,
  kExitConfigError = 2,
  kExitRuntimeError = 3,
};

struct ExperimentConfig {
  std::string experiment;
  std::string model_name;
  ParamMap model_params;

  double T = 1.0;
  int n_steps = 100;

  FilterConfig filter;
  bool dump_particles = false;

  std::uint64_t master_seed = 1;
  int n_replicas = 1;
  int workers = 1;

  DecompositionMode decomp_mode = DecompositionMode::Oracle;
  double decomp_threshold = 0.0;  // 0 selects the default threshold

  std::string output_dir = "out";

  int girsanov_paths = 100000;
  int assumption_samples = 4096;
  double assumption_radius = 6.0;
  int projection_mc = 100000;
  MeshSpec mesh{-4.0, 5.0, 360};
  double residual_bound_coeff = 5.0;  // frozen calibration, see tests

  nlohmann::json canonical;  // fully populated echo of the config
};

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // "path: message" entries
};

// Full structural and range validation; unknown keys are rejected with
// their paths. On success the canonical echo carries every default.
ValidationResult validate_config(const nlohmann::json& raw);
ValidationResult validate_config_file(const std::string& path);

std::vector<std::string> experiment_names();

struct ExperimentOutcome {
  int exit_code = kExitRuntimeError;
  bool pass = false;
  std::string output_dir;           // resolved (env root applied)
  std::vector<std::string> files;   // artifact paths written
  std::string message;
};

// Runs one experiment: deterministic given the config (all randomness flows
// from the master seed through named substreams), writes a manifest plus
// experiment-specific CSV/JSONL artifacts under the output directory.
// The JDFILTER_OUTPUT_ROOT environment variable prefixes relative output
// directories.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

}  // namespace jdf
