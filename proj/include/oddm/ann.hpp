#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "oddm/core.hpp"
#include "oddm/demod.hpp"

namespace oddm {

enum class Activation { SigmoidRail, Identity };

/// TIA + logistic driver + modulator. Rails at 0 and v_pi, bias v_pi/2 at zero current.
struct NeuronChain {
  double tia_gain_rad_per_ma = 10.0;
  double v_pi = 2.0;
  Activation activation = Activation::SigmoidRail;

  double bias_point() const { return 0.5 * v_pi; }
  /// Logistic steepness in 1/A such that pi/v_pi * dV/dI = tia gain at I = 0.
  double steepness_per_amp() const { return 4.0 * tia_gain_rad_per_ma * 1e3 / kPi; }
  double activate(double current_a) const;
  double derivative(double current_a) const;  // dV/dI
  void validate() const;
};

/// One ODDM interconnect plus its downstream neuron chains.
struct LayerNet {
  int n_up = 0;
  int n_down = 0;
  UnitVariant variant = UnitVariant::FixedSplit;
  double split_ratio = 0.75;
  std::vector<DemodCascade> cascades;  // one per downstream neuron
  std::vector<double> gamma;           // [p * n_up + m], fixed link phases
  LinkBudget budget;
  double noise_sigma = 0.0;            // normalized units
  int star_fanout = 0;                 // star output ports sharing the power, 0 = n_down
  NeuronChain chain;

  static LayerNet make(int n_up, int n_down, std::uint64_t seed, double noise_sigma,
                       Activation act = Activation::SigmoidRail,
                       UnitVariant variant = UnitVariant::FixedSplit);
  /// Physical amperes per normalized unit of differential current.
  double prefactor() const;
  int n_params() const;
  void validate() const;
};

/// Nominal noise for the hidden-to-output link and its rescaling to a smaller fan-in.
double nominal_link_noise(int n_up, int n_ref = 31, double sigma_ref = 0.061);

struct Network {
  std::vector<LayerNet> layers;

  int n_inputs() const { return layers.empty() ? 0 : layers.front().n_up; }
  int n_outputs() const { return layers.empty() ? 0 : layers.back().n_down; }
  int n_params() const;
  std::vector<double> params() const;
  void set_params(const std::vector<double>& p);
  std::uint64_t version() const { return version_; }
  void validate() const;

 private:
  std::uint64_t version_ = 1;
};

/// Forward pass record for a batch. u = normalized currents, y = chain outputs.
struct ForwardCache {
  std::uint64_t version = 0;
  std::size_t batch = 0;
  std::vector<std::vector<std::vector<cplx>>> coeffs;  // [layer][neuron][m]
  std::vector<std::vector<double>> phi;                // [layer][sample * n_up + m]
  std::vector<std::vector<double>> u;                  // [layer][sample * n_down + p]
  std::vector<std::vector<double>> y;                  // [layer][sample * n_down + p]

  /// Outputs of the last layer for one sample: V for sigmoid, u for identity.
  std::vector<double> output(std::size_t sample) const;
};

/// Inputs are voltages in [0, v_pi]. Noise per sample is seeded by derive_seed(seed, index).
ForwardCache forward(const Network& net, const std::vector<std::vector<double>>& inputs,
                     bool noise_on, std::uint64_t seed, double noise_scale = 1.0);

/// Gradient of a loss wrt every angle; d_out[sample][p] = dL/d(output).
std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             const std::vector<std::vector<double>>& d_out);

struct Dataset {
  std::vector<std::vector<double>> inputs;   // voltages
  std::vector<std::vector<double>> targets;  // analog values or 0/1 bits
  void validate(int n_in, int n_out) const;
};

enum class LossKind { AnalogMse, DigitalPreconditioned };

struct TrainConfig {
  int epochs = 60;
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch = 32;
  std::vector<double> steepness_schedule;  // empty: geometric from the physical slope
  double steepness_growth = 1.1;
  double target_scale = 1.0;               // analog targets are multiplied by this
  bool noise_during_training = true;
  std::uint64_t seed = 1;

  void validate() const;
  /// Digital preconditioning slope (per normalized current unit) for an epoch.
  double steepness(int epoch, const LayerNet& out_layer) const;
};

struct LossRecord {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::vector<double> epoch_loss;
};

struct training_diverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainResult train(Network& net, const Dataset& data, const TrainConfig& cfg, LossKind kind);

/// Batch loss for fixed parameters (no noise unless requested).
double evaluate_loss(const Network& net, const Dataset& data, LossKind kind, double steepness,
                     double target_scale, bool noise_on, std::uint64_t seed);

struct NoisePoint {
  double scale = 0.0;
  double mean_snr_db = 0.0;
};

/// Readout of one sample's outputs into a scalar estimate.
using Readout = std::function<double(const std::vector<double>&)>;

/// Mean SNR (variances averaged over groups) vs link-noise scale.
/// groups[g] holds the inputs of one test frequency and reference[g] the ideal samples.
std::vector<NoisePoint> noise_robustness_curve(
    const Network& net, const std::vector<std::vector<std::vector<double>>>& groups,
    const std::vector<std::vector<double>>& reference, const std::vector<double>& scales,
    const Readout& readout, std::uint64_t seed);

/// Least-squares slope of SNR vs log2(scale) over lo <= scale <= hi, dB per doubling (negative).
double snr_slope_per_doubling(const std::vector<NoisePoint>& curve, double lo, double hi);

std::string network_to_json(const Network& net, const TrainConfig& cfg, LossKind kind);
Network network_from_json(const std::string& text);
void write_loss_csv(const std::string& path, const TrainResult& r);

}  // namespace oddm
