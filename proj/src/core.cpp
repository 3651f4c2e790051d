#include "oddm/core.hpp"

#include <cmath>
#include <string>

#include "oddm/fft.hpp"

namespace oddm {

void CombGrid::validate() const {
  if (q_count < 1) throw std::invalid_argument("q_count must be >= 1");
  if (!(fsr_hz > 0)) throw std::invalid_argument("fsr_hz must be > 0");
  if (ui_multiple < 1) throw std::invalid_argument("ui_multiple must be >= 1");
}

void NetworkGeometry::validate() const {
  if (n_neurons < 1) throw std::invalid_argument("n_neurons must be >= 1");
  if (!(group_index > 0)) throw std::invalid_argument("group_index must be > 0");
  const double need = (variant == Variant::SharedPilot ? (2.0 * n_neurons - 1.0) : n_neurons) *
                      l0_increment_m;
  if (lr_reference_m < need * (1.0 - 1e-12))
    throw std::invalid_argument("lr_reference too short for the geometry variant");
  const double t = group_index * l0_increment_m / kC0;
  if (std::abs(t - tau0_s) > 1e-12 * std::abs(t))
    throw std::invalid_argument("tau0_s inconsistent with n_g * L0 / c0");
}

NetworkGeometry make_geometry(int n_neurons, Variant variant, const CombGrid& grid,
                              double group_index) {
  if (n_neurons < 1) throw std::invalid_argument("n_neurons must be >= 1");
  NetworkGeometry g;
  g.n_neurons = n_neurons;
  g.variant = variant;
  g.group_index = group_index;
  g.l0_increment_m = kC0 / (group_index * grid.span_hz());
  g.tau0_s = group_index * g.l0_increment_m / kC0;
  const double mult = variant == Variant::SharedPilot ? 2.0 * n_neurons - 1.0 : n_neurons;
  g.lr_reference_m = mult * g.l0_increment_m;
  return g;
}

void LinkBudget::validate() const {
  if (ll_r_db < 0) throw std::invalid_argument("ll_r_db must be >= 0");
  if (ll_mod_db < 0) throw std::invalid_argument("ll_mod_db must be >= 0");
  if (!(responsivity_a_per_w > 0 && responsivity_a_per_w <= 1.2))
    throw std::invalid_argument("responsivity_a_per_w must be in (0, 1.2]");
  if (comb_power_w < 0) throw std::invalid_argument("comb_power_w must be >= 0");
}

int min_comb_lines(int n_neurons, Variant variant) {
  if (n_neurons < 1) throw std::invalid_argument("n_neurons must be >= 1");
  return variant == Variant::SeparatePilot ? 2 * n_neurons : 4 * n_neurons - 1;
}

namespace {

// e^{sign i 2 pi j / q} for j = 0..q-1, indexed with exact modular arithmetic
std::vector<cplx> twiddles(int q, double sign) {
  std::vector<cplx> w(q);
  for (int j = 0; j < q; ++j) w[j] = std::polar(1.0, sign * 2.0 * kPi * j / q);
  return w;
}

}  // namespace

ChannelVector to_channel_basis(const CombLineVector& v, const CombGrid& grid) {
  const int q = grid.q_count;
  if (static_cast<int>(v.v.size()) != q)
    throw std::invalid_argument("comb-line vector length does not match grid");
  const auto w = twiddles(q, +1.0);
  ChannelVector out{std::vector<cplx>(q)};
  for (int m = 0; m < q; ++m) {
    cplx acc = 0.0;
    for (int k = 0; k < q; ++k) acc += v.v[k] * w[(static_cast<long>(k) * m) % q];
    out.v[m] = acc / static_cast<double>(q);
  }
  return out;
}

CombLineVector to_comb_basis(const ChannelVector& x, const CombGrid& grid) {
  const int q = grid.q_count;
  if (static_cast<int>(x.v.size()) != q)
    throw std::invalid_argument("channel vector length does not match grid");
  const auto w = twiddles(q, -1.0);
  CombLineVector out{std::vector<cplx>(q)};
  for (int k = 0; k < q; ++k) {
    cplx acc = 0.0;
    for (int m = 0; m < q; ++m) acc += x.v[m] * w[(static_cast<long>(k) * m) % q];
    out.v[k] = acc;
  }
  return out;
}

ChannelVector delay_shift(const ChannelVector& x, long k) {
  const long q = static_cast<long>(x.v.size());
  ChannelVector out{std::vector<cplx>(x.v.size())};
  if (q == 0) return out;
  const long s = ((k % q) + q) % q;
  for (long n = 0; n < q; ++n) out.v[(n + s) % q] = x.v[n];
  return out;
}

double photocurrent_prefactor(const LinkBudget& budget, int n_up, int n_down) {
  const double loss = std::pow(10.0, -budget.ll_r_db / 10.0 - budget.ll_mod_db / 20.0);
  return loss * budget.responsivity_a_per_w * budget.comb_power_w /
         (2.0 * n_down * std::sqrt(static_cast<double>(n_up)));
}

static double gamma_of(const LinkBudget& b, int m) {
  return m < static_cast<int>(b.gamma_pm.size()) ? b.gamma_pm[m] : 0.0;
}

double photocurrent_single(const LinkBudget& budget, const NetworkGeometry& geom, double phi_m,
                           double eta_pm, int m) {
  const int n = geom.n_neurons;
  const double pref = photocurrent_prefactor(budget, n, n);
  const cplx w = std::polar(1.0, eta_pm);
  return pref * (std::abs(w) * std::sin(phi_m + gamma_of(budget, m) - std::arg(w)));
}

double photocurrent_weighted(const LinkBudget& budget, const NetworkGeometry& geom,
                             const std::vector<double>& phi, const ChannelVector& weights) {
  const int n = geom.n_neurons;
  if (static_cast<int>(phi.size()) != n)
    throw std::invalid_argument("phi length must equal n_neurons");
  for (std::size_t m = n; m < weights.v.size(); ++m)
    if (weights.v[m] != cplx(0.0, 0.0))
      throw std::invalid_argument("nonzero weight outside channels 0..N-1");
  double acc = 0.0;
  for (int m = 0; m < n && m < static_cast<int>(weights.v.size()); ++m) {
    const cplx w = weights.v[m];
    if (w == cplx(0.0, 0.0)) continue;
    acc += std::abs(w) * std::sin(phi[m] + gamma_of(budget, m) - std::arg(w));
  }
  const double pref = photocurrent_prefactor(budget, n, n);
  return pref * acc;
}

std::vector<cplx> orthogonality_gram(const OpticalFieldTD& carrier,
                                     const std::vector<double>& delays, double t_ui) {
  const std::size_t len = carrier.samples.size();
  if (len == 0 || !(carrier.dt_s > 0)) throw std::invalid_argument("empty carrier field");
  const double n_ui_f = t_ui / carrier.dt_s;
  const long n_ui = std::lround(n_ui_f);
  if (n_ui < 1 || static_cast<std::size_t>(n_ui) > len)
    throw std::invalid_argument("t_ui not covered by field duration");

  std::vector<cplx> spec = carrier.samples;
  fft_forward(spec);
  const double df = 1.0 / (len * carrier.dt_s);

  const std::size_t nd = delays.size();
  std::vector<std::vector<cplx>> shifted(nd);
  for (std::size_t a = 0; a < nd; ++a) {
    std::vector<cplx> s(len);
    for (std::size_t k = 0; k < len; ++k) {
      const double f = carrier.ref_freq_hz + k * df;
      s[k] = spec[k] * std::polar(1.0, -2.0 * kPi * std::fmod(f * delays[a], 1.0));
    }
    fft_inverse(s);
    shifted[a] = std::move(s);
  }

  std::vector<cplx> g(nd * nd);
  for (std::size_t a = 0; a < nd; ++a)
    for (std::size_t b = 0; b < nd; ++b) {
      cplx acc = 0.0;
      for (long t = 0; t < n_ui; ++t) acc += shifted[a][t] * std::conj(shifted[b][t]);
      g[a * nd + b] = acc * carrier.power_scale / static_cast<double>(n_ui);
    }
  return g;
}

double temperature_phase_drift(double delta_tau, double omega, double n_g, double dneff_dt,
                               double delta_t_k) {
  return omega * delta_tau * (1.0 / n_g) * dneff_dt * delta_t_k;
}

double wrap_phase(double x) {
  double y = std::remainder(x, 2.0 * kPi);
  if (y <= -kPi) y += 2.0 * kPi;
  return y;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (stream * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

}  // namespace oddm
