#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oddm {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kC0 = 299792458.0;
inline constexpr double kQe = 1.602176634e-19;

/// Thrown when an operation is called on an object in the wrong state.
struct invalid_state : std::logic_error {
  using std::logic_error::logic_error;
};

/// Uniform comb grid. Lines are indexed 0..Q-1 from the lowest frequency.
struct CombGrid {
  int q_count = 123;
  double fsr_hz = 50e9;
  double center_freq_hz = 193.4e12;
  int ui_multiple = 1;

  double span_hz() const { return q_count * fsr_hz; }
  double t_ui() const { return ui_multiple / fsr_hz; }
  double tau0() const { return 1.0 / span_hz(); }
  void validate() const;
};

enum class Variant { SeparatePilot, SharedPilot };

struct NetworkGeometry {
  int n_neurons = 31;
  Variant variant = Variant::SharedPilot;
  double l0_increment_m = 0.0;
  double lr_reference_m = 0.0;
  double tau0_s = 0.0;
  double group_index = 4.4;

  void validate() const;
  double tau_r() const { return group_index * lr_reference_m / kC0; }
};

/// Geometry matched to a grid: L0 from the grid's unit delay, L_R at its minimum.
NetworkGeometry make_geometry(int n_neurons, Variant variant, const CombGrid& grid,
                              double group_index = 4.4);

struct CombLineVector {
  std::vector<cplx> v;
};

struct ChannelVector {
  std::vector<cplx> v;
};

struct LinkBudget {
  double ll_r_db = 12.0;
  double ll_mod_db = 4.55;
  double responsivity_a_per_w = 0.8;
  double comb_power_w = 0.5;
  std::vector<double> gamma_pm;  // per upstream channel m, radians
  double gamma_pr = 0.0;

  void validate() const;
};

/// Complex field envelope. Bin k of its DFT sits at ref_freq_hz + k/(n*dt).
struct OpticalFieldTD {
  std::vector<cplx> samples;
  double dt_s = 0.0;
  double power_scale = 1.0;
  double ref_freq_hz = 0.0;

  double duration() const { return samples.size() * dt_s; }
};

int min_comb_lines(int n_neurons, Variant variant);

ChannelVector to_channel_basis(const CombLineVector& v, const CombGrid& grid);
CombLineVector to_comb_basis(const ChannelVector& x, const CombGrid& grid);
ChannelVector delay_shift(const ChannelVector& x, long k);

/// Amplitude prefactor of a single-channel homodyne photocurrent, amperes.
/// n_up signals share the pilot split; n_down downstream neurons share the star.
double photocurrent_prefactor(const LinkBudget& budget, int n_up, int n_down);

double photocurrent_single(const LinkBudget& budget, const NetworkGeometry& geom, double phi_m,
                           double eta_pm, int m);

double photocurrent_weighted(const LinkBudget& budget, const NetworkGeometry& geom,
                             const std::vector<double>& phi, const ChannelVector& weights);

/// Rectangle-rule Gram matrix of delayed copies of a periodic carrier, row-major n x n.
std::vector<cplx> orthogonality_gram(const OpticalFieldTD& carrier,
                                     const std::vector<double>& delays, double t_ui);

double temperature_phase_drift(double delta_tau, double omega, double n_g, double dneff_dt,
                               double delta_t_k);

/// Wrap to (-pi, pi].
double wrap_phase(double x);

// seed helpers shared by every stochastic module
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace oddm
