#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oddm/core.hpp"
#include "oddm/link.hpp"

using namespace oddm;

namespace {

std::vector<cplx> random_vec(std::mt19937_64& g, int n) {
  std::normal_distribution<double> d;
  std::vector<cplx> v(n);
  for (auto& x : v) x = {d(g), d(g)};
  return v;
}

double max_err(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST_CASE("min_comb_lines") {
  CHECK(min_comb_lines(31, Variant::SharedPilot) == 123);
  CHECK(min_comb_lines(1, Variant::SeparatePilot) == 2);
  CHECK(min_comb_lines(3, Variant::SharedPilot) == 11);
  CHECK_THROWS_AS(min_comb_lines(0, Variant::SharedPilot), std::invalid_argument);
}

TEST_CASE("grid and geometry") {
  CombGrid g;
  CHECK(g.tau0() == doctest::Approx(162.6e-15).epsilon(1e-3));
  const auto geo = make_geometry(31, Variant::SharedPilot, g);
  CHECK(geo.l0_increment_m == doctest::Approx(11.08e-6).epsilon(5e-3));
  CHECK(geo.tau_r() == doctest::Approx(61 * g.tau0()).epsilon(1e-9));
  CombGrid bad = g;
  bad.q_count = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("channel basis: constants, delays, round trip") {
  CombGrid g;
  g.q_count = 11;
  CombLineVector ones{std::vector<cplx>(11, 1.0)};
  const auto d = to_channel_basis(ones, g);
  CHECK(std::abs(d.v[0] - 1.0) < 1e-14);
  for (int m = 1; m < 11; ++m) CHECK(std::abs(d.v[m]) < 1e-14);

  for (int m = 0; m < 11; ++m) {
    CombLineVector v;
    for (int q = 0; q < 11; ++q) v.v.push_back(std::polar(1.0, -2.0 * kPi * m * q / 11.0));
    const auto x = to_channel_basis(v, g);
    for (int k = 0; k < 11; ++k) CHECK(std::abs(x.v[k] - (k == m ? 1.0 : 0.0)) < 1e-12);
  }

  std::mt19937_64 rng(3);
  CombGrid g123;
  double worst = 0, parseval = 0;
  for (int t = 0; t < 1000; ++t) {
    CombLineVector v{random_vec(rng, 123)};
    const auto x = to_channel_basis(v, g123);
    worst = std::max(worst, max_err(to_comb_basis(x, g123).v, v.v));
    double sx = 0, sv = 0;
    for (auto c : x.v) sx += std::norm(c);
    for (auto c : v.v) sv += std::norm(c);
    parseval = std::max(parseval, std::abs(sx - sv / 123.0) / sx);
  }
  CHECK(worst < 1e-12);
  CHECK(parseval < 1e-12);
  CHECK_THROWS_AS(to_channel_basis(CombLineVector{std::vector<cplx>(5)}, g123), std::invalid_argument);
}

TEST_CASE("delay_shift") {
  CombGrid g;
  g.q_count = 17;
  ChannelVector d{std::vector<cplx>(17)};
  d.v[0] = 1.0;
  const auto s = delay_shift(d, 3);
  CHECK(s.v[3] == cplx(1.0));
  std::mt19937_64 rng(5);
  ChannelVector x{random_vec(rng, 17)};
  CHECK(max_err(delay_shift(x, 17).v, x.v) == 0.0);
  CHECK(max_err(delay_shift(delay_shift(x, 5), -5).v, x.v) < 1e-12);
  // equals a phase ramp in the comb-line basis
  auto c = to_comb_basis(x, g);
  for (int q = 0; q < 17; ++q) c.v[q] *= std::polar(1.0, -2.0 * kPi * 4 * q / 17.0);
  CHECK(max_err(to_channel_basis(c, g).v, delay_shift(x, 4).v) < 1e-12);
}

TEST_CASE("photocurrent prefactor and one-hot reduction") {
  LinkBudget b;
  const auto geo = make_geometry(31, Variant::SharedPilot, CombGrid{});
  CHECK(photocurrent_single(b, geo, 0.3, 0.3, 4) == 0.0);
  const double amp = photocurrent_single(b, geo, kPi / 2, 0.0, 0);
  CHECK(amp == doctest::Approx(43.3e-6).epsilon(0.01));
  CHECK(std::abs(amp - 41.9e-6) / 41.9e-6 < 0.05);
  CHECK(photocurrent_prefactor(b, 31, 31) / photocurrent_prefactor(b, 124, 124) == doctest::Approx(8.0));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  b.gamma_pm.assign(31, 0.0);
  for (auto& gm : b.gamma_pm) gm = u(rng);
  std::vector<double> phi(31);
  for (auto& p : phi) p = u(rng);
  for (int k = 0; k < 31 * 40; ++k) {
    const int m = k % 31;
    ChannelVector w{std::vector<cplx>(123)};
    const double eta = u(rng);
    w.v[m] = std::polar(1.0, eta);
    // bit-exact equivalence for one-hot weights
    CHECK(photocurrent_weighted(b, geo, phi, w) == photocurrent_single(b, geo, phi[m], eta, m));
  }
  ChannelVector eq{std::vector<cplx>(123)};
  std::vector<double> phi2(31, 0.0);
  b.gamma_pm.assign(31, kPi / 2);
  for (int m = 0; m < 9; ++m) eq.v[m] = 1.0 / 3.0;
  CHECK(photocurrent_weighted(b, geo, phi2, eq) ==
        doctest::Approx(3.0 * photocurrent_prefactor(b, 31, 31)).epsilon(1e-12));
  b.gamma_pm.assign(31, 0.0);
  CHECK(std::abs(photocurrent_weighted(b, geo, phi2, eq)) < 1e-18);
  eq.v[40] = 0.1;
  CHECK_THROWS_AS(photocurrent_weighted(b, geo, phi2, eq), std::invalid_argument);
}

TEST_CASE("orthogonality gram of a square comb") {
  CombGrid g;
  g.q_count = 8;
  SimConfig sim;
  sim.symbol_s = 1.0 / g.fsr_hz;
  sim.n_symbols = 1;
  sim.duration_s = sim.symbol_s;
  sim.optical_span_m = 8 * 0.4e-9;
  sim.dt_s = 1.0 / (g.fsr_hz * 64);
  const auto comb = synthesize_comb(g, CombShape::Square, 1.0, 11, sim, 0.5);
  std::vector<double> delays;
  for (int n = 0; n < 8; ++n) delays.push_back(n * g.tau0());
  const auto G = orthogonality_gram(comb, delays, g.t_ui());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(std::abs(G[i * 8 + j] - (i == j ? 0.5 : 0.0)) < 1e-10 * 0.5);
  CHECK_THROWS_AS(orthogonality_gram(comb, delays, 10 * g.t_ui()), std::invalid_argument);
}

TEST_CASE("gram off-diagonal of a low-coherence carrier decays with integration time") {
  // CW carrier with a random phase walk; residual cross terms average down as 1/sqrt(T).
  const double dt = 1e-13;
  const int n_long = 1 << 14;
  std::vector<double> t_int = {256 * dt, 1024 * dt, 4096 * dt, 16384 * dt};
  std::vector<double> rms(t_int.size(), 0.0);
  const int trials = 120;
  for (int r = 0; r < trials; ++r) {
    OpticalFieldTD f;
    f.dt_s = dt;
    const auto path = wiener_phase_path(n_long, dt, 2e11, derive_seed(77, r));
    for (int n = 0; n < n_long; ++n) f.samples.push_back(std::polar(1.0, path[n]));
    for (std::size_t i = 0; i < t_int.size(); ++i) {
      const auto G = orthogonality_gram(f, {0.0, 50 * dt}, t_int[i]);
      rms[i] += std::norm(G[1]) / trials;
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < t_int.size(); ++i) {
    const double x = std::log(t_int[i]), y = 0.5 * std::log(rms[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double n = t_int.size();
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("temperature phase drift") {
  const double w = 2 * kPi * 193.4e12;
  CHECK(temperature_phase_drift(0.0, w, 4.4, 1.8e-4, 100) == 0.0);
  const double p = temperature_phase_drift(15e-15, w, 4.4, 1.8e-4, 100);
  CHECK(p == doctest::Approx(0.075).epsilon(0.05));
  CHECK(p < 0.08);
  CHECK(temperature_phase_drift(15e-15, w, 4.4, 1.8e-4, -100) == -p);
  CHECK(temperature_phase_drift(30e-15, w, 4.4, 1.8e-4, 100) == doctest::Approx(2 * p));
  CHECK(temperature_phase_drift(15e-15, w, 4.4, 3.6e-4, 100) == doctest::Approx(2 * p));
}

TEST_CASE("wrap_phase and seeds") {
  CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_phase(3 * kPi) == doctest::Approx(kPi));
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
