#include "oddm/link.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "oddm/fft.hpp"

namespace oddm {
namespace {

// exp(-i 2 pi f tau) with the integer cycles removed before the trig call
cplx delay_phasor(double f, double tau) {
  const double cyc = f * tau;
  return std::polar(1.0, -2.0 * kPi * (cyc - std::floor(cyc)));
}

double uniform_open_closed(std::mt19937_64& rng, double a) {
  std::uniform_real_distribution<double> u(-a, a);
  return -u(rng);  // (-a, a]
}

std::size_t bins_per_line(const SimConfig& cfg, double fsr) {
  const double b = fsr * cfg.n_samples() * cfg.sim_dt();
  return static_cast<std::size_t>(std::llround(b));
}

double optical_span_hz(const SimConfig& cfg, double center_freq) {
  const double lam = kC0 / center_freq;
  return kC0 * cfg.optical_span_m / (lam * lam);
}

}  // namespace

Toggles Toggles::all() {
  Toggles t;
  t.opt_lw = t.rf_lw = t.rin = t.ase = t.shot = t.thermal = true;
  t.gd_mismatch = t.dcs_dispersion = t.star_phases = t.modulator_slope = t.wg_dispersion = true;
  return t;
}

Toggles Toggles::deterministic_only() const {
  Toggles t = *this;
  t.opt_lw = t.rf_lw = t.rin = t.ase = t.shot = t.thermal = false;
  return t;
}

int SimConfig::samples_per_symbol() const {
  if (!(dt_s > 0) || !(symbol_s > 0)) throw std::invalid_argument("dt_s and symbol_s must be > 0");
  return static_cast<int>(std::ceil(symbol_s / dt_s - 1e-9));
}

LinkSetup LinkSetup::defaults(int n_neurons) {
  LinkSetup s;
  s.grid.q_count = min_comb_lines(n_neurons, Variant::SharedPilot);
  s.geom = make_geometry(n_neurons, Variant::SharedPilot, s.grid);
  s.budget = link_budget_assemble(default_loss_components());
  s.dcs = DcsModel::defaults();
  return s;
}

void validate(const SimConfig& cfg, const LinkSetup& setup) {
  setup.grid.validate();
  setup.geom.validate();
  setup.budget.validate();
  setup.noise.validate();
  if (!(cfg.dt_s > 0)) throw std::invalid_argument("dt_s must be > 0");
  if (!(cfg.symbol_s > 0)) throw std::invalid_argument("symbol_s must be > 0");
  if (cfg.n_symbols < 1) throw std::invalid_argument("n_symbols must be >= 1");
  const double dur = cfg.n_symbols * cfg.symbol_s;
  if (std::abs(cfg.duration_s - dur) > 1e-9 * dur)
    throw std::invalid_argument("duration_s must equal n_symbols * symbol_s");
  const double cycles = dur * setup.grid.fsr_hz;
  if (std::abs(cycles - std::round(cycles)) > 1e-6 || std::round(cycles) < 1)
    throw std::invalid_argument("duration_s must be an integer number of comb periods (1/fsr_hz)");
  const double span = optical_span_hz(cfg, setup.grid.center_freq_hz);
  const double nyq = 1.0 / cfg.sim_dt();
  if (nyq < span)
    throw std::invalid_argument("dt_s too coarse: Nyquist bound 1/dt = " + std::to_string(nyq * 1e-12) +
                                " THz is below the optical span of " +
                                std::to_string(span * 1e-12) + " THz");
  if (setup.grid.span_hz() > nyq)
    throw std::invalid_argument("dt_s too coarse for the comb grid span");
  if (!(cfg.fwhm_rel > 0)) throw std::invalid_argument("fwhm_rel must be > 0");
  if (!(cfg.cutoff_hz > 0)) throw std::invalid_argument("cutoff_hz must be > 0");
  if (!(cfg.phase_amplitude_rad > 0)) throw std::invalid_argument("phase_amplitude_rad must be > 0");
  const int n = setup.geom.n_neurons;
  if (!cfg.gd_mismatch_fs.empty() && cfg.gd_mismatch_fs.size() != 1 &&
      static_cast<int>(cfg.gd_mismatch_fs.size()) != n)
    throw std::invalid_argument("gd_mismatch_fs must have 1 or n_neurons entries");
  if (setup.grid.q_count < min_comb_lines(n, setup.geom.variant))
    throw std::invalid_argument("q_count below the minimum comb line count for n_neurons");
  if (setup.geom.variant != Variant::SharedPilot)
    throw std::invalid_argument("variant: the link simulation covers the shared-pilot layout only");
}

std::size_t center_bin(std::size_t n_samples) { return n_samples / 2; }

SymbolSet generate_symbols(int n_channels, const SimConfig& cfg) {
  const int sps = cfg.samples_per_symbol();
  const std::size_t len = cfg.n_samples();
  const double dt = cfg.sim_dt();
  BesselFilterSpec filt{5, cfg.cutoff_hz};
  SymbolSet s;
  s.raw.resize(n_channels);
  s.waveform.resize(n_channels);
  for (int c = 0; c < n_channels; ++c) {
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0x5100 + static_cast<std::uint64_t>(c)));
    auto& raw = s.raw[c];
    raw.resize(cfg.n_symbols);
    for (auto& x : raw) x = uniform_open_closed(rng, cfg.phase_amplitude_rad);
    std::vector<double> held(len);
    for (std::size_t i = 0; i < len; ++i) held[i] = raw[i / sps];
    s.waveform[c] = filter_real(held, dt, [&](double f) { return bessel_response(filt, f); });
  }
  return s;
}

OpticalFieldTD synthesize_comb(const CombGrid& grid, CombShape shape, double fwhm_rel,
                               std::uint64_t seed, const SimConfig& cfg, double power_w) {
  if (!(fwhm_rel > 0)) throw std::invalid_argument("fwhm_rel must be > 0");
  const std::size_t len = cfg.n_samples();
  const double dt = cfg.sim_dt();
  const double df = 1.0 / (len * dt);
  const std::size_t b = bins_per_line(cfg, grid.fsr_hz);
  if (b == 0) throw std::invalid_argument("simulation window shorter than one comb period");
  const std::size_t kc = center_bin(len);
  const long qlo = -static_cast<long>(kc / b);
  const long qhi = static_cast<long>((len - 1 - kc) / b);

  std::vector<double> pw;
  std::vector<long> qs;
  const double w = fwhm_rel * grid.q_count / (2.0 * std::acosh(std::sqrt(2.0)));
  const long half_lo = -(grid.q_count - 1) / 2 - ((grid.q_count % 2 == 0) ? 1 : 0);
  const long half_hi = (grid.q_count - 1) / 2;
  for (long q = qlo; q <= qhi; ++q) {
    double p = 0.0;
    if (shape == CombShape::Sech2) {
      const double c = std::cosh(q / w);
      p = 1.0 / (c * c);
    } else {
      p = (q >= half_lo && q <= half_hi) ? 1.0 : 0.0;
    }
    if (p > 0.0) {
      pw.push_back(p);
      qs.push_back(q);
    }
  }
  const double tot = std::accumulate(pw.begin(), pw.end(), 0.0);
  std::mt19937_64 rng(seed);
  std::vector<cplx> spec(len, 0.0);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double th = uniform_open_closed(rng, kPi);
    spec[kc + qs[i] * static_cast<long>(b)] =
        std::polar(std::sqrt(power_w * pw[i] / tot) * static_cast<double>(len), th);
  }
  fft_inverse(spec);
  OpticalFieldTD f;
  f.samples = std::move(spec);
  f.dt_s = dt;
  f.power_scale = 1.0;
  f.ref_freq_hz = grid.center_freq_hz - static_cast<double>(kc) * df;
  return f;
}

std::vector<double> wiener_phase_path(std::size_t n, double dt, double lw_hz, std::uint64_t seed) {
  std::vector<double> w(n + 1, 0.0);
  if (lw_hz > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 * kPi * lw_hz * dt));
    for (std::size_t i = 0; i < n; ++i) w[i + 1] = w[i] + g(rng);
  }
  std::vector<double> psi(n);
  const double end = w[n];
  for (std::size_t i = 0; i < n; ++i) psi[i] = w[i] - end * static_cast<double>(i) / n;
  return psi;
}

OpticalFieldTD apply_stochastic_phase(const OpticalFieldTD& field, double lw_opt, double lw_rf,
                                      const CombGrid& grid, std::uint64_t seed) {
  if (lw_opt < 0 || lw_rf < 0) throw std::invalid_argument("linewidths must be >= 0");
  OpticalFieldTD out = field;
  if (lw_opt == 0.0 && lw_rf == 0.0) return out;
  const std::size_t len = field.samples.size();
  const double dt = field.dt_s;

  if (lw_rf > 0.0) {
    const auto psi = wiener_phase_path(len, dt, lw_rf, derive_seed(seed, 2));
    std::vector<cplx> spec = field.samples;
    fft_forward(spec);
    const std::size_t b = static_cast<std::size_t>(std::llround(grid.fsr_hz * len * dt));
    const std::size_t kc = center_bin(len);
    const long qlo = -static_cast<long>(kc / b);
    const long qhi = static_cast<long>((len - 1 - kc) / b);
    std::vector<cplx> c;
    for (long q = qlo; q <= qhi; ++q) c.push_back(spec[kc + q * static_cast<long>(b)] / double(len));
    for (std::size_t n = 0; n < len; ++n) {
      const double base = 2.0 * kPi * static_cast<double>((b * n) % len) / len;
      const double alpha = base + psi[n];
      const cplx w = std::polar(1.0, alpha);
      cplx acc = 0.0;
      for (std::size_t i = c.size(); i-- > 0;) acc = acc * w + c[i];
      const double carrier = 2.0 * kPi * static_cast<double>((kc * n) % len) / len;
      out.samples[n] = acc * std::polar(1.0, carrier + static_cast<double>(qlo) * alpha);
    }
  }
  if (lw_opt > 0.0) {
    const auto psi = wiener_phase_path(len, dt, lw_opt, derive_seed(seed, 1));
    for (std::size_t n = 0; n < len; ++n) out.samples[n] *= std::polar(1.0, psi[n]);
  }
  return out;
}

OpticalFieldTD apply_rin_ase(const OpticalFieldTD& field, double rin_db_hz,
                             const BesselFilterSpec& electrical, double ase_psd_w_hz,
                             std::uint64_t seed) {
  if (ase_psd_w_hz < 0) throw std::invalid_argument("ase_psd must be >= 0");
  OpticalFieldTD out = field;
  const std::size_t len = field.samples.size();
  const double fs = 1.0 / field.dt_s;
  if (std::isfinite(rin_db_hz)) {
    const double rin = std::pow(10.0, rin_db_hz / 10.0);
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::normal_distribution<double> g(0.0, std::sqrt(rin * fs / 2.0));
    std::vector<double> r(len);
    for (auto& x : r) x = g(rng);
    r = filter_real(r, field.dt_s, [&](double f) { return bessel_response(electrical, f); });
    for (std::size_t n = 0; n < len; ++n)
      out.samples[n] *= std::sqrt(std::max(0.0, 1.0 + r[n]));
  }
  if (ase_psd_w_hz > 0) {
    std::mt19937_64 rng(derive_seed(seed, 2));
    std::normal_distribution<double> g(0.0, std::sqrt(ase_psd_w_hz * fs / 2.0));
    for (auto& s : out.samples) s += cplx(g(rng), g(rng));
  }
  return out;
}

std::vector<std::vector<cplx>> star_distribute(const StarCouplerModel& star,
                                               const std::vector<std::vector<cplx>>& inputs,
                                               double df, std::size_t kc, bool with_gd) {
  const int np = star.n_ports;
  if (static_cast<int>(inputs.size()) != np) throw std::invalid_argument("port count mismatch");
  std::size_t len = 0;
  for (const auto& x : inputs) len = std::max(len, x.size());
  std::vector<std::vector<cplx>> out(np, std::vector<cplx>(len, 0.0));
  for (int o = 0; o < np; ++o)
    for (int i = 0; i < np; ++i) {
      const auto& x = inputs[i];
      if (x.empty()) continue;
      auto& y = out[o];
      if (!with_gd) {
        const cplx t = star.transfer(o, i, 0.0, false);
        for (std::size_t k = 0; k < len; ++k) y[k] += t * x[k];
      } else {
        const double tau = star.gd_offset_fs[static_cast<std::size_t>(o) * np + i] * 1e-15;
        const cplx step = std::polar(1.0, -2.0 * kPi * df * tau);
        cplx rot;
        for (std::size_t k = 0; k < len; ++k) {
          if (k % 4096 == 0) rot = star.transfer(o, i, (double(k) - double(kc)) * df, true);
          y[k] += rot * x[k];
          rot *= step;
        }
      }
    }
  return out;
}

LinkRun run_link(const SimConfig& cfg, const LinkSetup& setup, const SymbolSet& symbols,
                 const LinkOptions& opts) {
  validate(cfg, setup);
  const int n = setup.geom.n_neurons;
  if (static_cast<int>(symbols.waveform.size()) < n)
    throw std::invalid_argument("symbol set has fewer channels than n_neurons");
  const std::size_t len = cfg.n_samples();
  for (int c = 0; c < n; ++c)
    if (symbols.waveform[c].size() != len)
      throw std::invalid_argument("symbol waveform length does not match the simulation grid");
  const double dt = cfg.sim_dt();
  const double df = 1.0 / (len * dt);
  const std::size_t kc = center_bin(len);
  const double f0 = setup.grid.center_freq_hz;
  const double lam0 = kC0 / f0;
  const double tau0 = setup.geom.tau0_s;
  const double tau_r = setup.geom.tau_r();
  const double l0 = setup.geom.l0_increment_m;
  const auto& tg = cfg.toggles;
  const double resp = setup.budget.responsivity_a_per_w;
  const int n_down = opts.n_downstream < 0 ? n : opts.n_downstream;
  if (n_down > n) throw std::invalid_argument("n_downstream exceeds n_neurons");

  std::vector<double> dfk(len), fabs_(len);
  for (std::size_t k = 0; k < len; ++k) {
    dfk[k] = (static_cast<double>(k) - static_cast<double>(kc)) * df;
    fabs_[k] = f0 + dfk[k];
  }
  const double beta2 = beta2_from_d(cfg.wg_dispersion_ps_nm_km, lam0);
  auto wg_phasor = [&](std::size_t k, double length) {
    const double w = 2.0 * kPi * dfk[k];
    return std::polar(1.0, -0.5 * beta2 * length * w * w);
  };

  // comb source
  const std::uint64_t seed = cfg.rng_seed;
  const OpticalFieldTD comb = synthesize_comb(setup.grid, cfg.comb_shape, cfg.fwhm_rel,
                                              derive_seed(seed, 1), cfg, setup.budget.comb_power_w);
  std::vector<cplx> comb_spec = comb.samples;
  fft_forward(comb_spec);
  OpticalFieldTD field = comb;
  if (tg.opt_lw || tg.rf_lw)
    field = apply_stochastic_phase(field, tg.opt_lw ? setup.noise.lw_opt_hz : 0.0,
                                   tg.rf_lw ? setup.noise.lw_rf_hz : 0.0, setup.grid,
                                   derive_seed(seed, 2));
  if (tg.rin || tg.ase)
    field = apply_rin_ase(field, tg.rin ? setup.noise.rin_db_hz : -INFINITY,
                          BesselFilterSpec{5, cfg.cutoff_hz}, tg.ase ? setup.noise.ase_psd_w_hz : 0.0,
                          derive_seed(seed, 3));
  std::vector<cplx> cspec = field.samples;
  fft_forward(cspec);

  std::vector<std::size_t> line_bins;
  for (std::size_t k = 0; k < len; ++k)
    if (std::norm(comb_spec[k]) > 0.0) line_bins.push_back(k);

  const double a_r = std::sqrt(0.5) * std::pow(10.0, -setup.budget.ll_r_db / 20.0);
  const double a_s = std::sqrt(1.0 / (2.0 * n)) *
                     std::pow(10.0, -(setup.budget.ll_r_db + setup.budget.ll_mod_db) / 20.0);

  auto gd_of = [&](int b) {
    if (!tg.gd_mismatch || cfg.gd_mismatch_fs.empty()) return 0.0;
    return (cfg.gd_mismatch_fs.size() == 1 ? cfg.gd_mismatch_fs[0] : cfg.gd_mismatch_fs[b]) * 1e-15;
  };
  auto tx_signal = [&](int b, std::size_t k) {
    cplx h = a_s * delay_phasor(fabs_[k], b * tau0 + gd_of(b));
    if (tg.wg_dispersion) h *= wg_phasor(k, b * l0);
    return h;
  };

  // star ports: pilot in the middle, signals around it
  const int nports = n + 1;
  const int pilot_port = n / 2;
  auto port_of = [&](int b) { return b < pilot_port ? b : b + 1; };
  const StarCouplerModel star =
      StarCouplerModel::make_default(nports, derive_seed(seed, 4), cfg.star_gd_span_fs);

  std::vector<std::vector<cplx>> inputs(nports);
  {
    auto& sr = inputs[pilot_port];
    sr.resize(len);
    for (std::size_t k = 0; k < len; ++k) sr[k] = a_r * cspec[k] * delay_phasor(fabs_[k], tau_r);
  }
  const double kappa = setup.modulator.efficiency_per_hz();
  for (int b = 0; b < n; ++b) {
    if (!opts.active.empty() && !opts.active[b]) continue;
    std::vector<cplx> x(len);
    for (std::size_t k = 0; k < len; ++k) x[k] = cspec[k] * tx_signal(b, k);
    const auto& phi = symbols.waveform[b];
    std::vector<cplx> y = x;
    fft_inverse(y);
    if (tg.modulator_slope) {
      // exp(i phi (1 + kappa df)) expanded in kappa df
      std::vector<cplx> acc = y;
      std::vector<cplx> xj = x;
      double fact = 1.0;
      for (int j = 1; j <= 4; ++j) {
        for (std::size_t k = 0; k < len; ++k) xj[k] *= dfk[k];
        std::vector<cplx> tj = xj;
        fft_inverse(tj);
        fact *= j;
        for (std::size_t t = 0; t < len; ++t) {
          const cplx c = std::pow(cplx(0.0, kappa * phi[t]), j) / fact;
          acc[t] += c * tj[t];
        }
      }
      y = std::move(acc);
    }
    for (std::size_t t = 0; t < len; ++t) y[t] *= std::polar(1.0, phi[t]);
    fft_forward(y);
    inputs[port_of(b)] = std::move(y);
  }

  // lumped DCS cascade group-delay error of the upper demodulator branch
  std::vector<double> dcs_phase;
  if (tg.dcs_dispersion) {
    dcs_phase.assign(len, 0.0);
    std::vector<double> tau(len);
    for (std::size_t k = 0; k < len; ++k)
      tau[k] = setup.dcs.cascade_gd_error(kC0 / fabs_[k], 2 * n);
    for (std::size_t k = kc + 1; k < len; ++k)
      dcs_phase[k] = dcs_phase[k - 1] + 2.0 * kPi * 0.5 * (tau[k] + tau[k - 1]) * df;
    for (std::size_t k = kc; k-- > 0;)
      dcs_phase[k] = dcs_phase[k + 1] - 2.0 * kPi * 0.5 * (tau[k] + tau[k + 1]) * df;
  }

  LinkRun run;
  run.pairs.resize(n_down);
  run.tuned_channel.resize(n_down);
  run.eta.resize(n_down);
  run.full_scale.resize(n_down);

  const double inv_sqrt2 = std::sqrt(0.5);
  for (int p = 0; p < n_down; ++p) {
    const DemodSelect sel = p < static_cast<int>(opts.demods.size()) ? opts.demods[p] : DemodSelect{};
    const int m = sel.channel < 0 ? p : sel.channel;
    if (m >= n) throw std::invalid_argument("demodulator channel out of range");
    run.tuned_channel[p] = m;
    const int op = port_of(p);

    // received spectrum at this output port
    std::vector<cplx> xp(len, 0.0);
    for (int i = 0; i < nports; ++i) {
      const auto& s = inputs[i];
      if (s.empty()) continue;
      if (!tg.star_phases) {
        const cplx t = star.transfer(op, i, 0.0, false);
        for (std::size_t k = 0; k < len; ++k) xp[k] += t * s[k];
      } else {
        const double tau = star.gd_offset_fs[static_cast<std::size_t>(op) * nports + i] * 1e-15;
        const cplx step = std::polar(1.0, -2.0 * kPi * df * tau);
        cplx rot;
        for (std::size_t k = 0; k < len; ++k) {
          if (k % 4096 == 0) rot = star.transfer(op, i, dfk[k], true);
          xp[k] += rot * s[k];
          rot *= step;
        }
      }
    }

    std::vector<cplx> h_low(len), h_up(len);
    for (std::size_t k = 0; k < len; ++k) {
      h_low[k] = inv_sqrt2 * delay_phasor(fabs_[k], tau_r);
      cplx u;
      if (sel.cascade) {
        u = cascade_response(*sel.cascade, fabs_[k]);
      } else {
        u = delay_phasor(fabs_[k], m * tau0);
        if (tg.wg_dispersion) u *= wg_phasor(k, m * l0);
      }
      if (tg.dcs_dispersion) u *= std::polar(1.0, -dcs_phase[k]);
      h_up[k] = inv_sqrt2 * u;
    }

    // matched-term phasor from the noiseless comb: signal m (lower) times pilot (upper)
    cplx cm = 0.0;
    const int mport = port_of(m);
    for (std::size_t k : line_bins) {
      const cplx sig = comb_spec[k] * tx_signal(m, k) *
                       star.transfer(op, mport, dfk[k], tg.star_phases) * h_low[k];
      const cplx pil = comb_spec[k] * a_r * delay_phasor(fabs_[k], tau_r) *
                       star.transfer(op, pilot_port, dfk[k], tg.star_phases) * h_up[k];
      cm += sig * std::conj(pil);
    }
    cm /= static_cast<double>(len) * static_cast<double>(len);
    const double eta = sel.cascade ? 0.0 : std::arg(cm);
    run.eta[p] = eta;
    run.full_scale[p] = 2.0 * resp * std::abs(cm);
    const cplx rot_eta = std::polar(1.0, eta);

    std::vector<cplx> a(len), bb(len);
    for (std::size_t k = 0; k < len; ++k) {
      a[k] = xp[k] * h_low[k];
      bb[k] = xp[k] * h_up[k] * rot_eta;
    }
    fft_inverse(a);
    fft_inverse(bb);
    auto& pr = run.pairs[p];
    pr.dt_s = dt;
    pr.i_diff.resize(len);
    pr.i_sum.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      pr.i_diff[t] = 2.0 * resp * std::imag(a[t] * std::conj(bb[t]));
      pr.i_sum[t] = resp * (std::norm(a[t]) + std::norm(bb[t]));
    }
  }
  return run;
}

std::vector<double> add_electronics(const PhotocurrentPair& pair, const NoiseSpec& noise,
                                    const BesselFilterSpec& filter, ElectronicsNoise on,
                                    std::uint64_t seed) {
  const std::size_t len = pair.i_diff.size();
  if (pair.i_sum.size() != len || !(pair.dt_s > 0))
    throw std::invalid_argument("inconsistent photocurrent pair");
  const double fs = 1.0 / pair.dt_s;
  std::vector<double> x = pair.i_diff;
  if (on.thermal) {
    std::mt19937_64 rng(derive_seed(seed, 11));
    std::normal_distribution<double> g(0.0, noise.i_n_a_sqrt_hz * std::sqrt(fs / 2.0));
    for (auto& v : x) v += g(rng);
  }
  if (on.shot) {
    std::mt19937_64 rng(derive_seed(seed, 12));
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t t = 0; t < len; ++t)
      x[t] += g(rng) * std::sqrt(kQe * std::max(0.0, pair.i_sum[t]) * fs);
  }
  return filter_real(x, pair.dt_s, [&](double f) { return bessel_response(filter, f); });
}

double snr_from_sigma(double sigma_delta) { return 20.0 * std::log10(std::sqrt(0.5) / sigma_delta); }
double enob_from_snr(double snr_db) { return (snr_db - 1.76) / 6.02; }

std::vector<double> reference_waveform(const std::vector<double>& phi, double dt, double delay,
                                       const BesselFilterSpec& filter) {
  auto d = delay_real(phi, dt, delay);
  for (auto& v : d) v = std::sin(v);
  return filter_real(d, dt, [&](double f) { return bessel_response(filter, f); });
}

Calibration calibrate(const std::vector<std::vector<double>>& noiseless,
                      const std::vector<std::vector<double>>& reference) {
  if (noiseless.size() != reference.size()) throw std::invalid_argument("channel count mismatch");
  Calibration c;
  for (std::size_t ch = 0; ch < noiseless.size(); ++ch) {
    const auto& x = noiseless[ch];
    const auto& r = reference[ch];
    if (x.size() != r.size() || x.empty()) throw std::invalid_argument("waveform length mismatch");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double mr = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double sxr = 0.0, srr = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      sxr += (x[t] - mx) * (r[t] - mr);
      srr += (r[t] - mr) * (r[t] - mr);
    }
    if (srr == 0.0) throw std::invalid_argument("reference has zero variance");
    const double g = sxr / srr;
    c.gain.push_back(g);
    c.offset.push_back(mx - g * mr);
  }
  return c;
}

SigmaDeltaResult sigma_delta(const std::vector<std::vector<double>>& received,
                             const std::vector<std::vector<double>>& reference,
                             const Calibration& cal) {
  if (!cal.valid()) throw invalid_state("sigma_delta: missing calibration");
  if (received.size() != reference.size() || cal.gain.size() != received.size())
    throw std::invalid_argument("channel count mismatch");
  SigmaDeltaResult out;
  out.normalization = cal;
  double s1 = 0.0, s2 = 0.0;
  std::size_t cnt = 0;
  for (std::size_t ch = 0; ch < received.size(); ++ch) {
    const auto& x = received[ch];
    const auto& r = reference[ch];
    if (x.size() != r.size()) throw std::invalid_argument("waveform length mismatch");
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double d = (x[t] - cal.offset[ch]) / cal.gain[ch] - r[t];
      c1 += d;
      c2 += d * d;
    }
    const double n = static_cast<double>(x.size());
    out.per_channel_sigma.push_back(std::sqrt(std::max(0.0, c2 / n - (c1 / n) * (c1 / n))));
    s1 += c1;
    s2 += c2;
    cnt += x.size();
  }
  const double n = static_cast<double>(cnt);
  out.sigma_delta = std::sqrt(std::max(0.0, s2 / n - (s1 / n) * (s1 / n)));
  out.snr_db = snr_from_sigma(out.sigma_delta);
  out.q_factor = 1.0 / out.sigma_delta;
  out.enob = enob_from_snr(out.snr_db);
  return out;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

std::vector<std::vector<double>> detect(const LinkRun& run, const NoiseSpec& noise,
                                        const BesselFilterSpec& filt, ElectronicsNoise on,
                                        std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (std::size_t p = 0; p < run.pairs.size(); ++p)
    out.push_back(add_electronics(run.pairs[p], noise, filt, on, derive_seed(seed, 100 + p)));
  return out;
}

}  // namespace

LinkResult simulate_link(const SimConfig& cfg, const LinkSetup& setup, const LinkOptions& opts) {
  const int n = setup.geom.n_neurons;
  const BesselFilterSpec filt{5, cfg.cutoff_hz};
  const auto symbols = generate_symbols(n, cfg);
  const auto run = run_link(cfg, setup, symbols, opts);
  const ElectronicsNoise on{cfg.toggles.shot, cfg.toggles.thermal};
  const auto received = detect(run, setup.noise, filt, on, derive_seed(cfg.rng_seed, 5));

  const double dt = cfg.sim_dt();
  std::vector<std::vector<double>> ref;
  for (std::size_t p = 0; p < run.pairs.size(); ++p)
    ref.push_back(reference_waveform(symbols.waveform[run.tuned_channel[p]], dt,
                                     setup.geom.tau_r(), filt));

  std::vector<std::vector<double>> quiet;
  if (cfg.toggles.any_stochastic()) {
    SimConfig twin = cfg;
    twin.toggles = cfg.toggles.deterministic_only();
    const auto run2 = run_link(twin, setup, symbols, opts);
    quiet = detect(run2, setup.noise, filt, {}, 0);
  } else {
    quiet = received;
  }
  LinkResult res;
  res.sd = sigma_delta(received, ref, calibrate(quiet, ref));

  std::vector<double> all_x, all_r;
  double sum_abs = 0.0;
  for (std::size_t p = 0; p < received.size(); ++p) {
    all_x.insert(all_x.end(), received[p].begin(), received[p].end());
    all_r.insert(all_r.end(), ref[p].begin(), ref[p].end());
    sum_abs += std::abs(pearson(received[p], ref[p]));
  }
  res.corr_pooled = pearson(all_x, all_r);
  res.mean_abs_corr = sum_abs / received.size();
  double fs = 0.0, icm = 0.0;
  std::size_t cnt = 0;
  for (std::size_t p = 0; p < run.pairs.size(); ++p) {
    fs += run.full_scale[p];
    for (double v : run.pairs[p].i_sum) icm += v;
    cnt += run.pairs[p].i_sum.size();
  }
  res.full_scale_a = fs / run.pairs.size();
  res.i_cm_mean_a = icm / cnt;
  return res;
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "fwhm") return SweepAxis::Fwhm;
  if (s == "cutoff") return SweepAxis::Cutoff;
  if (s == "lw_opt") return SweepAxis::LwOpt;
  if (s == "lw_rf") return SweepAxis::LwRf;
  if (s == "power") return SweepAxis::Power;
  if (s == "gd_mismatch") return SweepAxis::GdMismatch;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Fwhm: return "fwhm";
    case SweepAxis::Cutoff: return "cutoff";
    case SweepAxis::LwOpt: return "lw_opt";
    case SweepAxis::LwRf: return "lw_rf";
    case SweepAxis::Power: return "power";
    case SweepAxis::GdMismatch: return "gd_mismatch";
  }
  return "?";
}

void apply_sweep_point(SweepAxis axis, double value, SimConfig& cfg, LinkSetup& setup) {
  switch (axis) {
    case SweepAxis::Fwhm: cfg.fwhm_rel = value; break;
    case SweepAxis::Cutoff: cfg.cutoff_hz = value; break;
    case SweepAxis::LwOpt:
      setup.noise.lw_opt_hz = value;
      cfg.toggles.opt_lw = value > 0;
      break;
    case SweepAxis::LwRf:
      setup.noise.lw_rf_hz = value;
      cfg.toggles.rf_lw = value > 0;
      break;
    case SweepAxis::Power: setup.budget.comb_power_w = value; break;
    case SweepAxis::GdMismatch:
      cfg.gd_mismatch_fs = {value};
      cfg.toggles.gd_mismatch = true;
      break;
  }
}

std::vector<SweepRecord> sweep(SweepAxis axis, const std::vector<double>& points,
                               const SimConfig& cfg, const LinkSetup& setup, int repeats,
                               int jobs) {
  if (points.empty()) throw std::invalid_argument("sweep needs at least one point");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  const std::size_t total = points.size() * static_cast<std::size_t>(repeats);
  std::vector<SweepRecord> out(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= total) break;
      const std::size_t i = job / repeats;
      const int r = static_cast<int>(job % repeats);
      SimConfig c = cfg;
      LinkSetup s = setup;
      apply_sweep_point(axis, points[i], c, s);
      c.rng_seed = derive_seed(cfg.rng_seed, (static_cast<std::uint64_t>(i) << 20) | r);
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = simulate_link(c, s);
      const auto t1 = std::chrono::steady_clock::now();
      SweepRecord& rec = out[job];
      rec.axis = axis;
      rec.point_index = i;
      rec.value = points[i];
      rec.repeat = r;
      rec.seed = c.rng_seed;
      rec.sigma_delta = res.sd.sigma_delta;
      rec.snr_db = res.sd.snr_db;
      rec.enob = res.sd.enob;
      rec.corr = res.corr_pooled;
      rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace oddm
