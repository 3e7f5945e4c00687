#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "jdfilter/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"jdfilter: partially observed jump-diffusion filtering toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "JSON config file")->required();

  std::string validate_path;
  auto* validate =
      app.add_subcommand("validate", "validate a config file and echo it");
  validate->add_option("config", validate_path, "JSON config file")->required();

  auto* list_models = app.add_subcommand("list-models", "list model zoo entries");
  auto* list_exps =
      app.add_subcommand("list-experiments", "list experiment names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto vr = jdf::validate_config_file(config_path);
      if (!vr.config) {
        for (const auto& e : vr.errors) std::cerr << "config error: " << e << "\n";
        return jdf::kExitConfigError;
      }
      const auto outcome = jdf::run_experiment(*vr.config);
      if (!outcome.message.empty())
        std::cerr << "error: " << outcome.message << "\n";
      for (const auto& f : outcome.files) std::cout << f << "\n";
      std::cout << (outcome.exit_code == jdf::kExitPass ? "PASS" : "FAIL")
                << "\n";
      return outcome.exit_code;
    }
    if (validate->parsed()) {
      const auto vr = jdf::validate_config_file(validate_path);
      if (!vr.config) {
        for (const auto& e : vr.errors) std::cerr << "config error: " << e << "\n";
        return jdf::kExitConfigError;
      }
      std::cout << vr.config->canonical.dump(2) << "\n";
      return jdf::kExitPass;
    }
    if (list_models->parsed()) {
      for (const auto& name : jdf::model_names()) {
        std::cout << name << ":";
        for (const auto& [k, v] : jdf::model_defaults(name))
          std::cout << " " << k << "=" << v;
        std::cout << "\n";
      }
      return jdf::kExitPass;
    }
    if (list_exps->parsed()) {
      for (const auto& name : jdf::experiment_names()) std::cout << name << "\n";
      return jdf::kExitPass;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return jdf::kExitRuntimeError;
  }
  return jdf::kExitRuntimeError;
}
