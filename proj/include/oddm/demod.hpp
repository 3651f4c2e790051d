#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oddm/core.hpp"

namespace oddm {

enum class UnitVariant { TunableMzi, FixedSplit };

/// One 2x2 stage. Port 0 bypasses, port 1 feeds the unit delay.
struct ReceiverUnit {
  UnitVariant variant = UnitVariant::TunableMzi;
  double theta_a = 0.0;
  double theta_b = 0.0;
  double split_ratio = 0.75;
};

using Mat2 = std::array<cplx, 4>;  // row-major

Mat2 unit_matrix(const ReceiverUnit& u);

struct DemodCascade {
  std::vector<ReceiverUnit> units;
  double unit_delay_s = 0.0;
  double final_phase = 0.0;

  static DemodCascade make(int n_units, UnitVariant variant, double unit_delay_s,
                           double split_ratio = 0.75);
  int n_units() const { return static_cast<int>(units.size()); }
  int n_params() const;
  std::vector<double> params() const;
  void set_params(const std::vector<double>& p);
  void validate() const;
};

/// Tapped-output polynomial coefficients a_k (k = 0..N-1) in powers of exp(-i w tau0).
std::vector<cplx> cascade_coefficients(const DemodCascade& c);
/// Full two-port matrix at delay phasor z (row-major; input 0 -> output 0 is the tap).
Mat2 cascade_matrix(const DemodCascade& c, cplx z);
/// Tap response at absolute optical frequency f.
cplx cascade_response(const DemodCascade& c, double f_hz);

/// Reverse-mode product: g = dL/dRe(a) + i dL/dIm(a) for the coefficients; returns dL/dparams.
std::vector<double> cascade_coefficients_vjp(const DemodCascade& c, const std::vector<cplx>& g);

CombLineVector cascade_transfer(const DemodCascade& c, const CombGrid& grid);
ChannelVector weights_from_settings(const DemodCascade& c, const CombGrid& grid);

double deviation(const std::vector<cplx>& actual, const std::vector<cplx>& target);
/// Scales a channel-basis target so that max_q |v_q| = mu in the comb-line basis.
ChannelVector mu_rescale(const ChannelVector& target, double mu, const CombGrid& grid);

struct SolverConfig {
  int starts = 8;
  int max_iter = 300;
  double stop_deviation = 1e-7;
  std::uint64_t seed = 1;
  UnitVariant variant = UnitVariant::TunableMzi;
  double split_ratio = 0.75;
};

struct SolveResult {
  DemodCascade cascade;
  double deviation = 1.0;
  bool converged = false;
};

/// Multi-start Levenberg-Marquardt on the angles. The target is used as given
/// (apply mu_rescale beforehand); never throws on non-convergence.
SolveResult solve_settings(const ChannelVector& target, int n_units, const CombGrid& grid,
                           const SolverConfig& cfg);
/// Convenience overload: rescales the target by mu first.
SolveResult solve_settings(const ChannelVector& target, double mu, int n_units,
                           const CombGrid& grid, const SolverConfig& cfg);

enum class ScenarioKind { AllRandom, EqualSubset };

struct FeasibilityScenario {
  ScenarioKind kind = ScenarioKind::AllRandom;
  int subset_m = 0;
  double mu = 0.7;
  int trials = 1000;
  double threshold_lo = 0.01;
  double threshold_hi = 0.10;
  std::uint64_t seed = 1;
  int n_units = 7;
  int q_count = 27;

  std::string label() const;
  void validate() const;
};

struct FeasibilityRecord {
  std::string scenario;
  double mu = 0.0;
  int trials = 0;
  int fail_lo = 0;
  int fail_hi = 0;
  std::uint64_t seed = 0;
  double max_deviation = 0.0;
};

ChannelVector feasibility_target(const FeasibilityScenario& s, int trial);
FeasibilityRecord feasibility_experiment(const FeasibilityScenario& s, const SolverConfig& cfg,
                                         int jobs = 1);

/// The five scenarios of the feasibility study: all random, equal subsets of 1, 3, 5, 7.
std::vector<FeasibilityScenario> standard_scenarios(double mu, int trials, std::uint64_t seed);

}  // namespace oddm
