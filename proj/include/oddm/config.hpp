#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "oddm/link.hpp"
#include "oddm/tiadc.hpp"

namespace oddm {

/// Config problem tied to a dotted field path ("sim.dt").
struct config_error : std::runtime_error {
  std::string field;
  config_error(const std::string& f, const std::string& msg)
      : std::runtime_error(f.empty() ? msg : f + ": " + msg), field(f) {}
};

enum class Dim { None, Time, Frequency, Power, Length, CurrentDensity, Dispersion };

/// Number in SI base units, or "<number> <unit>". Throws config_error naming the field.
double parse_quantity(const nlohmann::json& v, Dim dim, const std::string& field);

struct SweepSpec {
  std::vector<double> points;
  double cutoff_hz = 6.25e9;
  double fwhm_rel = 1.5;
};

struct FeasibilitySpec {
  std::vector<double> mu = {0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
  int trials = 1000;
  int n_units = 7;
  int q_count = 27;
  SolverConfig solver;
};

struct EqualizerSpec {
  FrontEndConfig frontend;
  DatasetConfig dataset;
  EqualizerConfig analog;        // trained and judged without link noise
  EqualizerConfig analog_noisy;  // trained with nominal link noise
  EqualizerConfig digital;
  std::vector<double> noise_scales = {0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
};

struct RunConfig {
  LinkSetup setup;
  SimConfig sim;
  SweepSpec fwhm, cutoff, lw_opt, lw_rf, power, gd;
  FeasibilitySpec feasibility;
  EqualizerSpec equalizer;
  nlohmann::json normalized;  // fully defaulted echo, SI units
};

/// Defaults are the nominal operating point (N = 31, Q = 123, 50 GHz, 500 mW, 12.5 GHz).
RunConfig default_config();
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
nlohmann::json normalize(const RunConfig& c);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace oddm
