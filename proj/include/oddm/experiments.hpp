#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "oddm/config.hpp"

namespace oddm {

struct unknown_experiment : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
  std::string name;
  std::string config_path;  // empty: defaults
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int repeats = 1;
  int jobs = 1;
};

/// One reference comparison line in summary.txt.
struct Check {
  std::string metric;
  double value = 0.0;
  double target = 0.0;
  double tol = 0.0;    // |value - target| <= tol, or bound when kind is not "eq"
  std::string kind;    // "eq", "le", "ge"
  bool pass() const;
};

struct ExperimentOutcome {
  std::vector<std::string> files;
  std::vector<Check> checks;
  double wall_time_s = 0.0;
};

const std::vector<std::string>& experiment_names();

/// Runs one named experiment and writes CSV, manifest.json and summary.txt into out_dir.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const RunConfig& cfg);

}  // namespace oddm
