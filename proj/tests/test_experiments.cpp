#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jdfilter/experiment.hpp"

using namespace jdf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_config(const std::string& experiment, const std::string& model) {
  json j;
  j["experiment"] = experiment;
  j["model"]["name"] = model;
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("jdf_test_" + tag);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config validation catches the documented failure modes") {
  json j = minimal_config("simulate", "zero");
  j["model"].erase("name");
  auto vr = validate_config(j);
  REQUIRE_FALSE(vr.config.has_value());
  bool mentions_name = false;
  for (const auto& e : vr.errors)
    mentions_name = mentions_name || e.find("model.name") != std::string::npos;
  CHECK(mentions_name);

  json j2 = minimal_config("simulate", "zero");
  j2["grid"]["n_steps"] = 0;
  vr = validate_config(j2);
  REQUIRE_FALSE(vr.config.has_value());

  json j3 = minimal_config("simulate", "zero");
  j3["grid"]["bogus_key"] = 1;
  vr = validate_config(j3);
  REQUIRE_FALSE(vr.config.has_value());
  CHECK(vr.errors[0].find("grid.bogus_key") != std::string::npos);

  json j4 = minimal_config("simulate", "no_such_model");
  vr = validate_config(j4);
  REQUIRE_FALSE(vr.config.has_value());

  json j5 = minimal_config("simulate", "linear_gaussian");
  j5["model"]["params"]["bad_param"] = 2.0;
  vr = validate_config(j5);
  REQUIRE_FALSE(vr.config.has_value());
}

TEST_CASE("a minimal config is echoed canonically with defaults") {
  const auto vr = validate_config(minimal_config("simulate", "zero"));
  REQUIRE(vr.config.has_value());
  const json& c = vr.config->canonical;
  CHECK(c["grid"]["T"] == 1.0);
  CHECK(c["grid"]["n_steps"] == 100);
  CHECK(c["filter"]["resampling"] == "systematic");
  CHECK(c["seeds"]["master"] == 1);
  CHECK(c["decomposition"]["mode"] == "oracle");
}

TEST_CASE("simulate on the zero model writes constant signal paths") {
  json j = minimal_config("simulate", "zero");
  j["grid"] = {{"T", 0.5}, {"n_steps", 8}};
  const fs::path dir = fresh_dir("simzero");
  j["output_dir"] = dir.string();
  const auto vr = validate_config(j);
  REQUIRE(vr.config.has_value());
  const auto outcome = run_experiment(*vr.config);
  CHECK(outcome.exit_code == kExitPass);

  std::ifstream csv(dir / "path_r0.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,x1,y1");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == 0.0);
  }
  CHECK(rows == 9);
}

TEST_CASE("girsanov check with zero observation drift passes") {
  json j = minimal_config("girsanov_check", "linear_gaussian");
  j["model"]["params"]["h"] = 0.0;
  j["grid"] = {{"T", 0.5}, {"n_steps", 16}};
  j["girsanov"] = {{"n_paths", 500}};
  const fs::path dir = fresh_dir("girszero");
  j["output_dir"] = dir.string();
  const auto vr = validate_config(j);
  REQUIRE(vr.config.has_value());
  const auto outcome = run_experiment(*vr.config);
  CHECK(outcome.exit_code == kExitPass);
  json rep;
  std::ifstream(dir / "report.jsonl") >> rep;
  CHECK(rep["mean_gamma_T"] == 1.0);
}

TEST_CASE("experiments re-run byte-identically, independent of workers") {
  json j = minimal_config("filter_run", "ou_jump");
  j["grid"] = {{"T", 0.1}, {"n_steps", 20}};
  j["filter"] = {{"n_particles", 64}};
  j["seeds"] = {{"master", 777}, {"n_replicas", 1}};
  const fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2"),
                 d3 = fresh_dir("det3");

  j["output_dir"] = d1.string();
  auto v1 = validate_config(j);
  REQUIRE(v1.config.has_value());
  REQUIRE(run_experiment(*v1.config).exit_code == kExitPass);

  j["output_dir"] = d2.string();
  auto v2 = validate_config(j);
  REQUIRE(run_experiment(*v2.config).exit_code == kExitPass);

  j["output_dir"] = d3.string();
  j["workers"] = 2;
  auto v3 = validate_config(j);
  REQUIRE(run_experiment(*v3.config).exit_code == kExitPass);

  for (const char* name : {"filter_r0.jsonl", "innovation_r0.json"}) {
    CHECK(slurp(d1 / name) == slurp(d2 / name));
    CHECK(slurp(d1 / name) == slurp(d3 / name));
  }
}

TEST_CASE("assumption experiment writes a passing report for the zoo entry") {
  json j = minimal_config("assumption_check", "tanh_obs");
  j["assumption"] = {{"n_samples", 256}, {"radius", 4.0}};
  const fs::path dir = fresh_dir("assump");
  j["output_dir"] = dir.string();
  const auto vr = validate_config(j);
  REQUIRE(vr.config.has_value());
  CHECK(run_experiment(*vr.config).exit_code == kExitPass);
  json rep;
  std::ifstream(dir / "report.json") >> rep;
  CHECK(rep["pass"] == true);
  CHECK(rep["entries"].size() == 5);
}

TEST_CASE("experiment names are exposed for the CLI") {
  const auto names = experiment_names();
  CHECK(names.size() == 9);
  bool has_zakai = false;
  for (const auto& n : names) has_zakai = has_zakai || n == "zakai_residual";
  CHECK(has_zakai);
}

TEST_CASE("output root environment variable prefixes relative directories") {
  const fs::path root = fresh_dir("rootenv");
  setenv("JDFILTER_OUTPUT_ROOT", root.string().c_str(), 1);
  json j = minimal_config("simulate", "zero");
  j["grid"] = {{"T", 0.1}, {"n_steps", 2}};
  j["output_dir"] = "nested/out";
  const auto vr = validate_config(j);
  REQUIRE(vr.config.has_value());
  const auto outcome = run_experiment(*vr.config);
  unsetenv("JDFILTER_OUTPUT_ROOT");
  CHECK(outcome.exit_code == kExitPass);
  CHECK(fs::exists(root / "nested/out/manifest.json"));
}
