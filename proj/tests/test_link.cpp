#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "oddm/fft.hpp"
#include "oddm/link.hpp"

using namespace oddm;

namespace {

// N = 3 setup on a short grid: fast enough for exhaustive checks.
struct Small {
  SimConfig sim;
  LinkSetup setup = LinkSetup::defaults(3);
  Small() {
    sim.dt_s = 0.1e-12;
    sim.optical_span_m = 60e-9;
    sim.n_symbols = 100;
    sim.duration_s = sim.n_symbols * sim.symbol_s;
    sim.comb_shape = CombShape::Square;
  }
};

double rms(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / x.size());
}

std::vector<double> line_powers(const OpticalFieldTD& f) {
  std::vector<cplx> s = f.samples;
  fft_forward(s);
  std::vector<double> p;
  const double l = static_cast<double>(s.size());
  double peak = 0;
  for (auto c : s) peak = std::max(peak, std::norm(c));
  for (auto c : s)
    if (std::norm(c) > 1e-20 * peak) p.push_back(std::norm(c) / (l * l));
  return p;
}

}  // namespace

TEST_CASE("symbols: deterministic, uniform, band-limited") {
  SimConfig c;
  c.dt_s = c.symbol_s / 4;
  c.n_symbols = 10000;
  c.duration_s = c.n_symbols * c.symbol_s;
  const auto a = generate_symbols(2, c), b = generate_symbols(2, c);
  CHECK(a.waveform == b.waveform);
  CHECK(a.raw[0] != a.raw[1]);
  auto x = a.raw[0];
  std::sort(x.begin(), x.end());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = (x[i] + kPi) / (2 * kPi);
    d = std::max({d, std::abs(cdf - double(i) / x.size()), std::abs(cdf - double(i + 1) / x.size())});
  }
  CHECK(d < 1.63 / std::sqrt(double(x.size())));  // KS, p > 0.01
  for (double v : x) {
    CHECK(v > -kPi);
    CHECK(v <= kPi);
  }

  Small s;
  const auto w = generate_symbols(1, s.sim);
  std::vector<cplx> spec(w.waveform[0].begin(), w.waveform[0].end());
  std::vector<double> held(w.waveform[0].size());
  const int sps = s.sim.samples_per_symbol();
  for (std::size_t i = 0; i < held.size(); ++i) held[i] = w.raw[0][i / sps];
  std::vector<cplx> hs(held.begin(), held.end());
  fft_forward(spec);
  fft_forward(hs);
  const BesselFilterSpec filt{5, s.sim.cutoff_hz};
  for (std::size_t k = 1; k < spec.size() / 2; k += 37) {
    const double f = bin_frequency(k, spec.size(), s.sim.sim_dt());
    CHECK(std::abs(spec[k]) <= std::abs(bessel_response(filt, f)) * std::abs(hs[k]) * (1 + 1e-9) + 1e-9);
  }
}

TEST_CASE("comb synthesis") {
  Small s;
  const auto sq = synthesize_comb(s.setup.grid, CombShape::Square, 1.0, 3, s.sim, 0.5);
  const auto p = line_powers(sq);
  REQUIRE(p.size() == 11);
  for (double v : p) CHECK(v == doctest::Approx(0.5 / 11).epsilon(1e-12));
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(0.5).epsilon(1e-12));

  // 123-line grid: half-maximum width of the sech^2 envelope
  SimConfig big;
  LinkSetup st = LinkSetup::defaults(31);
  const auto sech = synthesize_comb(st.grid, CombShape::Sech2, 1.5, 3, big, 0.5);
  std::vector<cplx> spec = sech.samples;
  fft_forward(spec);
  const std::size_t kc = center_bin(spec.size());
  const std::size_t b = static_cast<std::size_t>(std::llround(st.grid.fsr_hz * big.n_samples() * big.sim_dt()));
  const double pk = std::norm(spec[kc]);
  double lo = 0, hi = 0;
  for (long q = 1; q < 200; ++q) {
    const double r = std::norm(spec[kc + q * b]) / pk, rp = std::norm(spec[kc + (q - 1) * b]) / pk;
    if (r < 0.5 && rp >= 0.5) hi = (q - 1) + (rp - 0.5) / (rp - r);
    const double l = std::norm(spec[kc - q * b]) / pk, lp = std::norm(spec[kc - (q - 1) * b]) / pk;
    if (l < 0.5 && lp >= 0.5) lo = (q - 1) + (lp - 0.5) / (lp - l);
  }
  const double lam = kC0 / st.grid.center_freq_hz;
  const double fwhm_nm = (lo + hi) * st.grid.fsr_hz * lam * lam / kC0 * 1e9;
  CHECK(fwhm_nm == doctest::Approx(75.0).epsilon(0.03));

  // zero static phases: intensity repeats every comb period
  std::vector<cplx> flat = spec;
  for (auto& c : flat) c = std::abs(c);
  fft_inverse(flat);
  const std::size_t period = static_cast<std::size_t>(std::llround(1.0 / (st.grid.fsr_hz * big.sim_dt())));
  for (std::size_t n = 0; n < 3 * period; n += 7)
    CHECK(std::norm(flat[n]) == doctest::Approx(std::norm(flat[n + period])).epsilon(1e-9));
  CHECK(std::norm(flat[0]) > 50 * std::norm(flat[period / 2]));
}

TEST_CASE("stochastic phase: off is identity, optical linewidth statistics") {
  Small s;
  const auto f = synthesize_comb(s.setup.grid, CombShape::Square, 1.0, 3, s.sim, 0.5);
  CHECK(apply_stochastic_phase(f, 0, 0, s.setup.grid, 1).samples == f.samples);
  CHECK_THROWS_AS(apply_stochastic_phase(f, -1, 0, s.setup.grid, 1), std::invalid_argument);

  OpticalFieldTD cw;
  cw.dt_s = 0.995e-12;
  cw.samples.assign(20000, cplx(1.0));
  const int k = 20;  // 19.9 ps
  double acc = 0;
  int cnt = 0;
  for (int r = 0; r < 1000; ++r) {
    const auto o = apply_stochastic_phase(cw, 1e6, 0, s.setup.grid, derive_seed(5, r));
    for (int n = 0; n + k < 10000; n += 500) {
      const double d = std::arg(o.samples[n + k] * std::conj(o.samples[n]));
      acc += d * d;
      ++cnt;
    }
  }
  CHECK(std::sqrt(acc / cnt) == doctest::Approx(phase_noise_std(1e6, 19.9e-12)).epsilon(0.1));
  CHECK(std::sqrt(acc / cnt) == doctest::Approx(0.0112).epsilon(0.1));
}

TEST_CASE("stochastic phase: RF linewidth timing jitter of an edge line") {
  Small s;
  // single line 5 FSR above the center
  const std::size_t len = s.sim.n_samples();
  const std::size_t b = static_cast<std::size_t>(std::llround(s.setup.grid.fsr_hz * len * s.sim.sim_dt()));
  std::vector<cplx> spec(len, 0.0);
  spec[center_bin(len) + 5 * b] = double(len);
  fft_inverse(spec);
  OpticalFieldTD f;
  f.samples = spec;
  f.dt_s = s.sim.sim_dt();
  const int k = 199;  // 19.9 ps
  double acc = 0;
  int cnt = 0;
  for (int r = 0; r < 400; ++r) {
    const auto o = apply_stochastic_phase(f, 0, 1e3, s.setup.grid, derive_seed(9, r));
    for (std::size_t n = 0; n + k < len / 2; n += 400) {
      const double d = std::arg(o.samples[n + k] * std::conj(f.samples[n + k]) *
                                std::conj(o.samples[n] * std::conj(f.samples[n])));
      acc += d * d;
      ++cnt;
    }
  }
  const double jitter = std::sqrt(acc / cnt) / (2 * kPi * 5 * s.setup.grid.fsr_hz);
  CHECK(jitter == doctest::Approx(1.1e-15).epsilon(0.2));
}

TEST_CASE("RIN and ASE") {
  OpticalFieldTD cw;
  cw.dt_s = 1e-12;
  cw.samples.assign(1 << 18, cplx(1.0));
  const BesselFilterSpec bw{5, 12.5e9};
  CHECK(apply_rin_ase(cw, -INFINITY, bw, 0.0, 1).samples == cw.samples);
  const auto o = apply_rin_ase(cw, -136, bw, 0.0, 1);
  double m = 0, v = 0;
  for (auto c : o.samples) m += std::norm(c);
  m /= o.samples.size();
  for (auto c : o.samples) v += (std::norm(c) - m) * (std::norm(c) - m);
  v /= o.samples.size();
  CHECK(m == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(v == doctest::Approx(std::pow(10.0, -13.6) * 12.5e9).epsilon(0.1));
  const auto a = apply_rin_ase(cw, -INFINITY, bw, 1e-15, 2);
  CHECK(a.samples != cw.samples);
  CHECK_THROWS_AS(apply_rin_ase(cw, -136, bw, -1.0, 1), std::invalid_argument);
}

TEST_CASE("electronics: pure filtering is linear, noise matches the closed forms") {
  PhotocurrentPair a, b, ab;
  const std::size_t n = 1 << 20;
  for (auto* p : {&a, &b, &ab}) {
    p->dt_s = 1e-12;
    p->i_sum.assign(n, 532.7e-6);
  }
  for (std::size_t t = 0; t < n; ++t) {
    a.i_diff.push_back(std::sin(0.001 * t) * 1e-5);
    b.i_diff.push_back(std::cos(0.0037 * t) * 2e-5);
    ab.i_diff.push_back(a.i_diff[t] + b.i_diff[t]);
  }
  const NoiseSpec ns;
  const BesselFilterSpec f{5, 12.5e9};
  const auto ya = add_electronics(a, ns, f, {}, 1), yb = add_electronics(b, ns, f, {}, 1),
             yab = add_electronics(ab, ns, f, {}, 1);
  double e = 0;
  for (std::size_t t = 0; t < n; ++t) e = std::max(e, std::abs(yab[t] - ya[t] - yb[t]));
  CHECK(e < 1e-12 * 3e-5);

  PhotocurrentPair z = a;
  z.i_diff.assign(n, 0.0);
  const double neb = noise_equivalent_bandwidth(f);
  const auto ref = noise_sigmas(532.7e-6, neb, ns.i_n_a_sqrt_hz);
  const double shot = rms(add_electronics(z, ns, f, {true, false}, 3));
  const double th = rms(add_electronics(z, ns, f, {false, true}, 3));
  CHECK(shot * shot == doctest::Approx(ref.shot * ref.shot).epsilon(0.05));
  CHECK(th * th == doctest::Approx(ref.thermal * ref.thermal).epsilon(0.05));
  CHECK(shot == doctest::Approx(1.47e-6).epsilon(0.05));
  CHECK(th == doctest::Approx(1.13e-6).epsilon(0.05));
  PhotocurrentPair z4 = z;
  z4.i_sum.assign(n, 4 * 532.7e-6);
  CHECK(rms(add_electronics(z4, ns, f, {true, false}, 3)) == doctest::Approx(2 * shot).epsilon(0.03));
}

TEST_CASE("sigma_delta and derived figures") {
  const std::vector<std::vector<double>> r = {{0.1, 0.5, -0.3, 0.9}, {0.0, -0.2, 0.4, 0.3}};
  CHECK_THROWS_AS(sigma_delta(r, r, Calibration{}), invalid_state);
  const auto cal = calibrate(r, r);
  const auto s = sigma_delta(r, r, cal);
  CHECK(s.sigma_delta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(snr_from_sigma(0.061) == doctest::Approx(21.28).epsilon(1e-3));
  CHECK(1.0 / 0.061 == doctest::Approx(16.4).epsilon(0.01));
  CHECK(enob_from_snr(snr_from_sigma(0.061)) == doctest::Approx(3.25).epsilon(0.01));
  CHECK(enob_from_snr(21.3) == doctest::Approx(3.246).epsilon(1e-3));
}

TEST_CASE("config validation names the field") {
  Small s;
  SimConfig c = s.sim;
  c.duration_s *= 1.5;
  try {
    validate(c, s.setup);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("duration_s") != std::string::npos);
  }
  c = s.sim;
  c.dt_s = 1e-12;
  try {
    validate(c, s.setup);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("Nyquist") != std::string::npos);
  }
  c = s.sim;
  c.gd_mismatch_fs = {1, 2};
  CHECK_THROWS_AS(validate(c, s.setup), std::invalid_argument);
  CHECK_NOTHROW(validate(s.sim, s.setup));
}

TEST_CASE("lossless star distribution conserves power") {
  const auto star = StarCouplerModel::make_default(4, 2);
  std::vector<std::vector<cplx>> in(4);
  double pin = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 64; ++k) {
      in[i].push_back(std::polar(1.0 + 0.1 * i, 0.3 * k * (i + 1)));
      pin += std::norm(in[i].back());
    }
  const auto out = star_distribute(star, in, 1e9, 32, false);
  double pout = 0;
  for (const auto& o : out)
    for (auto c : o) pout += std::norm(c);
  CHECK(pout == doctest::Approx(pin).epsilon(1e-9));
  CHECK_THROWS_AS(star_distribute(star, {in[0]}, 1e9, 32, false), std::invalid_argument);
}

TEST_CASE("ideal link: tracking and orthogonality rejection") {
  // quasi-static symbols: the phasor spectrum stays far below the FSR beat notes
  Small s;
  s.sim.cutoff_hz = 0.5e9;
  const auto sym = generate_symbols(3, s.sim);
  const BesselFilterSpec filt{5, 2.5e9};
  for (int m = 0; m < 3; ++m) {
    LinkOptions only;
    only.active.assign(3, false);
    only.active[m] = true;
    const auto run = run_link(s.sim, s.setup, sym, only);
    for (std::size_t t = 0; t < run.pairs[m].i_diff.size(); ++t)
      CHECK_MESSAGE(std::abs(run.pairs[m].i_diff[t]) <= run.pairs[m].i_sum[t] * (1 + 1e-12), t);
    const auto rx = add_electronics(run.pairs[m], s.setup.noise, filt, {}, 0);
    const auto ref = reference_waveform(sym.waveform[m], s.sim.sim_dt(), s.setup.geom.tau_r(), filt);
    std::vector<double> d(rx.size());
    for (std::size_t t = 0; t < rx.size(); ++t) d[t] = rx[t] / run.full_scale[m] - ref[t];
    CHECK(rms(d) < 1e-3);
    for (int p = 0; p < 3; ++p) {
      if (p == m) continue;
      const auto leak = add_electronics(run.pairs[p], s.setup.noise, filt, {}, 0);
      CHECK(rms(leak) / run.full_scale[p] < 1e-3);
    }
  }
}

TEST_CASE("full-size link: determinism, decorrelation at one unit delay, FWHM trend") {
  LinkSetup st = LinkSetup::defaults(31);
  SimConfig c;
  c.cutoff_hz = 6.25e9;
  c.toggles.shot = c.toggles.thermal = true;
  const auto r1 = simulate_link(c, st), r2 = simulate_link(c, st);
  CHECK(r1.sd.sigma_delta == r2.sd.sigma_delta);
  CHECK(r1.corr_pooled == r2.corr_pooled);

  c.toggles = Toggles{};
  c.toggles.gd_mismatch = true;
  c.gd_mismatch_fs = {163.0};
  CHECK(std::abs(simulate_link(c, st).corr_pooled) < 0.1);
  c.gd_mismatch_fs = {-163.0};
  CHECK(std::abs(simulate_link(c, st).corr_pooled) < 0.1);

  c.gd_mismatch_fs.clear();
  c.toggles = Toggles{};
  const auto recs = sweep(SweepAxis::Fwhm, {0.5, 0.75, 1.0, 1.25, 1.5}, c, st, 1, 4);
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i].sigma_delta <= recs[i - 1].sigma_delta);
  CHECK(parse_sweep_axis("gd_mismatch") == SweepAxis::GdMismatch);
  CHECK(to_string(SweepAxis::LwRf) == "lw_rf");
  CHECK_THROWS_AS(parse_sweep_axis("nope"), std::invalid_argument);
}
