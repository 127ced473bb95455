#pragma once

#include "dytb/io.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dytb {

/// Everything a batch run depends on. Unset shifts mean zero for the first
/// grid and -L/4 + h on every axis for the second; k < 0 means the depth.
struct ExperimentConfig {
  int dimension = 1;
  int top_scale = 0;
  int depth = 6;
  std::vector<double> shift;
  std::vector<double> shift2;
  std::string measure = "lebesgue";  // lebesgue | random | sparse | geometric | path to a measure CSV
  std::string kernel = "hilbert_mollified:0.05";
  double alpha = 1.0;
  std::string lambda;  // dominating function spec; empty = the kernel's own
  std::string system = "t1";  // t1 | random | block_sign | counterexample
  double eps = 0.5;
  double C = 2.0;
  std::string forest = "linf";  // linf | l2 | trivial
  double delta = 0.5;
  double s = 4.0;
  std::string sequence = "mescar";  // carleson: mescar | gcar | ar | br
  int r = 2;
  double gamma = 0.25;
  double eta = 0.1;
  int k = -1;
  int N = 16;
  int level = 2;
  std::vector<double> x;
  std::size_t trials = 10000;
  std::size_t functions = 20;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  std::string out = "out";

  int truncation() const { return k < 0 ? depth : k; }
};

Json to_json(const ExperimentConfig& c);
/// Unknown keys and ill-typed values are rejected.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::string& path);

/// Overrides every field whose DYTB_<UPPERCASE NAME> variable is set. String
/// fields take the raw value; the others parse it as JSON.
void apply_environment(ExperimentConfig& c, const std::function<std::optional<std::string>(const std::string&)>& getenv);

struct RunResult {
  bool pass = true;
  Json report;                      // also written to <out>/<command>.json
  std::vector<std::string> files;   // artifacts written
  std::string summary;              // one line for the terminal
};

const std::vector<std::string>& command_names();

/// Runs one subcommand and writes its artifacts under c.out. Every artifact
/// carries the config hash. Throws `Error` on invalid configuration.
RunResult run_command(const std::string& command, const ExperimentConfig& c);

}  // namespace dytb
