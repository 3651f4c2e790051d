#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oddm/core.hpp"

namespace oddm {

struct BesselFilterSpec {
  int order = 5;
  double cutoff_hz = 12.5e9;
  void validate() const;
};

/// Analog 5th-order Bessel lowpass, magnitude-normalized to -3 dB at cutoff.
cplx bessel_response(const BesselFilterSpec& spec, double f_hz);
std::vector<cplx> bessel_transfer(const BesselFilterSpec& spec, const std::vector<double>& freqs);
double noise_equivalent_bandwidth(const BesselFilterSpec& spec);

struct NoiseSigmas {
  double shot = 0.0;
  double thermal = 0.0;
};
NoiseSigmas noise_sigmas(double i_cm, double f_neb, double i_n);

/// Second-order propagation constant in s^2/m for dispersion D in ps/(nm km).
double beta2_from_d(double d_ps_nm_km, double wavelength_m);
/// Spectral phase per comb line, applied as exp(-i phase); group delay = d(phase)/d(omega).
std::vector<double> dispersion_phase(double d_ps_nm_km, double length_m, const CombGrid& grid);
/// Group delay relative to the grid center at optical frequency offset df_hz.
double dispersion_group_delay(double d_ps_nm_km, double length_m, double wavelength_m,
                              double df_hz);

struct SohModulatorModel {
  double v_pi = 2.0;
  double il_db = 2.55;
  double efficiency_slope = 0.042;
  double slope_span_m = 75e-9;
  double center_wavelength_m = 1.55e-6;

  double efficiency(double lambda_m) const;
  /// Efficiency change per Hz of optical frequency offset from center.
  double efficiency_per_hz() const;
};
double modulator_phase(const SohModulatorModel& model, double drive_v, double lambda_m);
/// Data-dependent group delay implied by the efficiency slope at a given phase swing.
double modulator_group_delay(const SohModulatorModel& model, double phase_rad);

enum class LossClass { Common, SignalOnly };
struct LossComponent {
  std::string name;
  double db = 0.0;
  LossClass cls = LossClass::Common;
};
std::vector<LossComponent> default_loss_components();
LinkBudget link_budget_assemble(const std::vector<LossComponent>& components,
                                const LinkBudget& base = LinkBudget{});

double phase_noise_std(double lw_hz, double tau_delta);
/// Equivalent timing jitter of the RF linewidth over tau_delta, seconds.
double rf_jitter_std(double lw_rf_hz, double tau_delta, double fsr_hz);

/// Wavelength-indexed table with linear interpolation and flat extrapolation.
struct Table1D {
  std::string quantity;
  std::string unit;
  std::vector<double> wavelength_nm;
  std::vector<double> value;

  double at(double lambda_nm) const;
};
Table1D load_table(const std::string& path);
void save_table(const Table1D& t, const std::string& path);
/// Resolves a table file name against ODDM_DATA_DIR, then the source data directory.
std::string resolve_data_path(const std::string& name);

struct DcsModel {
  Table1D coupling_vs_lambda;
  Table1D gd_imbalance_vs_lambda;  // fs

  static DcsModel defaults();
  static DcsModel load(const std::string& coupling_path, const std::string& gd_path);
  /// Lumped group-delay error of n cascaded devices, seconds.
  double cascade_gd_error(double lambda_m, int n_devices) const;
};

struct StarCouplerModel {
  int n_ports = 0;
  std::vector<double> excess_loss_db;  // [out * n + in]
  std::vector<double> gd_offset_fs;
  std::vector<double> gamma;

  /// Unitary-phase default: DFT kernel with seeded random input/output phases,
  /// gd offsets span_fs (u_out + u_in) / 2 over normalized port positions; separable, so the
  /// transfer stays unitary with delays on.
  static StarCouplerModel make_default(int n_ports, std::uint64_t seed, double gd_span_fs = 20.0);
  cplx transfer(int out, int in, double df_hz, bool with_gd) const;
};

struct NoiseSpec {
  double i_n_a_sqrt_hz = 10e-12;
  double rin_db_hz = -136.0;
  double lw_opt_hz = 1e6;
  double lw_rf_hz = 1e3;
  double responsivity = 0.8;
  double ase_psd_w_hz = 0.0;
  void validate() const;
};

double wavelength_of(double freq_hz);

}  // namespace oddm
