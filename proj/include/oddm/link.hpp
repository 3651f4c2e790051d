#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oddm/core.hpp"
#include "oddm/demod.hpp"
#include "oddm/devices.hpp"

namespace oddm {

enum class CombShape { Sech2, Square };

struct Toggles {
  bool opt_lw = false;
  bool rf_lw = false;
  bool rin = false;
  bool ase = false;
  bool shot = false;
  bool thermal = false;
  bool gd_mismatch = false;
  bool dcs_dispersion = false;
  bool star_phases = false;
  bool modulator_slope = false;
  bool wg_dispersion = false;

  static Toggles all();
  bool any_stochastic() const { return opt_lw || rf_lw || rin || ase || shot || thermal; }
  Toggles deterministic_only() const;
};

struct SimConfig {
  double dt_s = 23e-15;
  double duration_s = 2e-9;
  double symbol_s = 20e-12;
  int n_symbols = 100;
  CombShape comb_shape = CombShape::Sech2;
  double fwhm_rel = 1.5;
  std::uint64_t rng_seed = 1;
  Toggles toggles;
  std::vector<double> gd_mismatch_fs;  // one value (uniform) or one per branch

  double cutoff_hz = 12.5e9;
  double phase_amplitude_rad = kPi;  // symbols uniform on (-a, a]
  double optical_span_m = 340e-9;
  double wg_dispersion_ps_nm_km = 660.0;
  double star_gd_span_fs = 20.0;

  int samples_per_symbol() const;
  double sim_dt() const { return symbol_s / samples_per_symbol(); }
  std::size_t n_samples() const {
    return static_cast<std::size_t>(samples_per_symbol()) * n_symbols;
  }
};

/// Everything besides the simulation grid: comb grid, geometry, device models.
struct LinkSetup {
  CombGrid grid;
  NetworkGeometry geom;
  LinkBudget budget;
  NoiseSpec noise;
  DcsModel dcs;
  SohModulatorModel modulator;

  static LinkSetup defaults(int n_neurons = 31);
};

void validate(const SimConfig& cfg, const LinkSetup& setup);

struct PhotocurrentPair {
  std::vector<double> i_diff;
  std::vector<double> i_sum;
  double dt_s = 0.0;
};

struct SymbolSet {
  std::vector<std::vector<double>> raw;       // [channel][symbol]
  std::vector<std::vector<double>> waveform;  // [channel][sample], filtered
};

SymbolSet generate_symbols(int n_channels, const SimConfig& cfg);

/// Comb field on the simulation grid, spectrum at nonnegative offsets from ref_freq_hz.
OpticalFieldTD synthesize_comb(const CombGrid& grid, CombShape shape, double fwhm_rel,
                               std::uint64_t seed, const SimConfig& cfg, double power_w);
/// Index of the DFT bin holding the grid center line.
std::size_t center_bin(std::size_t n_samples);

/// Periodic Wiener phase path (Brownian bridge), increments N(0, 2 pi lw dt).
std::vector<double> wiener_phase_path(std::size_t n, double dt, double lw_hz, std::uint64_t seed);

OpticalFieldTD apply_stochastic_phase(const OpticalFieldTD& field, double lw_opt, double lw_rf,
                                      const CombGrid& grid, std::uint64_t seed);
OpticalFieldTD apply_rin_ase(const OpticalFieldTD& field, double rin_db_hz,
                             const BesselFilterSpec& electrical, double ase_psd_w_hz,
                             std::uint64_t seed);

/// Demodulator choice for one downstream neuron.
struct DemodSelect {
  int channel = -1;                      // single-delay demodulator tuned to this channel
  std::optional<DemodCascade> cascade;   // pilot-shaping cascade instead of a single delay
};

struct LinkOptions {
  std::vector<bool> active;           // per upstream branch, empty = all active
  std::vector<DemodSelect> demods;    // per downstream neuron, empty = diagonal
  int n_downstream = -1;              // default N
};

struct LinkRun {
  std::vector<PhotocurrentPair> pairs;  // per downstream neuron
  std::vector<int> tuned_channel;
  std::vector<double> eta;
  std::vector<double> full_scale;  // |I_diff| amplitude of the matched term, amperes
};

LinkRun run_link(const SimConfig& cfg, const LinkSetup& setup, const SymbolSet& symbols,
                 const LinkOptions& opts = {});

/// Ideal (N+1)-port distribution of input spectra onto every output port.
std::vector<std::vector<cplx>> star_distribute(const StarCouplerModel& star,
                                               const std::vector<std::vector<cplx>>& inputs,
                                               double df, std::size_t kc, bool with_gd);

struct ElectronicsNoise {
  bool shot = false;
  bool thermal = false;
};
std::vector<double> add_electronics(const PhotocurrentPair& pair, const NoiseSpec& noise,
                                    const BesselFilterSpec& filter, ElectronicsNoise on,
                                    std::uint64_t seed);

struct Calibration {
  std::vector<double> gain;
  std::vector<double> offset;
  bool valid() const { return !gain.empty() && gain.size() == offset.size(); }
};

struct SigmaDeltaResult {
  double sigma_delta = 0.0;
  std::vector<double> per_channel_sigma;
  Calibration normalization;
  double snr_db = 0.0;
  double q_factor = 0.0;
  double enob = 0.0;
};

double snr_from_sigma(double sigma_delta);
double enob_from_snr(double snr_db);

/// Reference waveform: Bessel(sin(phi(t - delay))).
std::vector<double> reference_waveform(const std::vector<double>& phi, double dt, double delay,
                                       const BesselFilterSpec& filter);
Calibration calibrate(const std::vector<std::vector<double>>& noiseless,
                      const std::vector<std::vector<double>>& reference);
SigmaDeltaResult sigma_delta(const std::vector<std::vector<double>>& received,
                             const std::vector<std::vector<double>>& reference,
                             const Calibration& cal);

struct LinkResult {
  SigmaDeltaResult sd;
  double corr_pooled = 0.0;     // received vs intended reference, all channels pooled
  double mean_abs_corr = 0.0;   // mean over channels of |corr|
  double full_scale_a = 0.0;    // mean matched-term amplitude
  double i_cm_mean_a = 0.0;     // mean common-mode current
};

/// Main run plus noiseless calibration twin; returns the signal-integrity record.
LinkResult simulate_link(const SimConfig& cfg, const LinkSetup& setup,
                         const LinkOptions& opts = {});

enum class SweepAxis { Fwhm, Cutoff, LwOpt, LwRf, Power, GdMismatch };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepRecord {
  SweepAxis axis = SweepAxis::Fwhm;
  std::size_t point_index = 0;
  double value = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  double sigma_delta = 0.0;
  double snr_db = 0.0;
  double enob = 0.0;
  double corr = 0.0;
  double wall_time_s = 0.0;
};

void apply_sweep_point(SweepAxis axis, double value, SimConfig& cfg, LinkSetup& setup);
std::vector<SweepRecord> sweep(SweepAxis axis, const std::vector<double>& points,
                               const SimConfig& cfg, const LinkSetup& setup, int repeats,
                               int jobs = 1);

}  // namespace oddm
