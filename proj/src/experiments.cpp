#include "oddm/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "oddm/demod.hpp"
#include "oddm/fft.hpp"

namespace oddm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Ctx {
  const ExperimentSpec& spec;
  const RunConfig& cfg;
  ExperimentOutcome out;
  json seeds = json::object();

  std::ofstream open(const std::string& name) {
    const fs::path p = fs::path(spec.out_dir) / name;
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << std::setprecision(10);
    out.files.push_back(name);
    return f;
  }
  std::string path(const std::string& name) {
    out.files.push_back(name);
    return (fs::path(spec.out_dir) / name).string();
  }
  std::uint64_t seed(const std::string& label, std::uint64_t stream) {
    const std::uint64_t s = derive_seed(spec.seed, stream);
    seeds[label] = s;
    return s;
  }
  void check(const std::string& metric, double v, double target, double tol, const std::string& kind) {
    out.checks.push_back({metric, v, target, tol, kind});
  }
};

// Sweeps run the distortion-only floor at a reduced cutoff, with
// electronic noise on for the power sweep.
SimConfig sweep_base(const RunConfig& cfg, const SweepSpec& s, std::uint64_t seed) {
  SimConfig c = cfg.sim;
  c.toggles = Toggles{};
  c.gd_mismatch_fs.clear();
  c.cutoff_hz = s.cutoff_hz;
  c.fwhm_rel = s.fwhm_rel;
  c.rng_seed = seed;
  return c;
}

void write_sweep(Ctx& x, const std::string& file,
                 const std::vector<std::pair<SweepAxis, std::vector<SweepRecord>>>& runs) {
  std::ofstream f = x.open(file);
  f << "axis,value,repeat,seed,sigma_delta,snr_db,enob,corr\n";
  for (const auto& [axis, recs] : runs)
    for (const auto& r : recs)
      f << to_string(axis) << ',' << r.value << ',' << r.repeat << ',' << r.seed << ','
        << r.sigma_delta << ',' << r.snr_db << ',' << r.enob << ',' << r.corr << '\n';
}

std::map<double, SweepRecord> mean_by_value(const std::vector<SweepRecord>& recs) {
  std::map<double, SweepRecord> mean;
  std::map<double, int> cnt;
  for (const auto& r : recs) {
    auto& m = mean[r.value];
    m.value = r.value;
    m.sigma_delta += r.sigma_delta;
    m.corr += r.corr;
    ++cnt[r.value];
  }
  for (auto& [v, m] : mean) {
    m.sigma_delta /= cnt[v];
    m.corr /= cnt[v];
  }
  return mean;
}

const SweepRecord* at(const std::map<double, SweepRecord>& m, double v) {
  for (const auto& [k, r] : m)
    if (std::abs(k - v) <= 1e-9 * std::max(1.0, std::abs(v))) return &r;
  return nullptr;
}

void comb_demo(Ctx& x) {
  const auto& c = x.cfg;
  const std::uint64_t s = x.seed("comb_phases", 1);
  const auto comb = synthesize_comb(c.setup.grid, c.sim.comb_shape, c.sim.fwhm_rel, s, c.sim,
                                    c.setup.budget.comb_power_w);
  std::vector<cplx> spec = comb.samples;
  fft_forward(spec);
  const std::size_t len = spec.size();
  const double df = 1.0 / (len * comb.dt_s);
  {
    auto f = x.open("comb_lines.csv");
    f << "bin,freq_hz,power_w\n";
    for (std::size_t k = 0; k < len; ++k) {
      const double p = std::norm(spec[k]) / (double(len) * double(len));
      if (p > 0) f << k << ',' << comb.ref_freq_hz + k * df << ',' << p << '\n';
    }
  }
  {
    // one comb period of intensity, dispersed phases vs all-zero phases
    std::vector<cplx> flat(len);
    for (std::size_t k = 0; k < len; ++k) flat[k] = std::abs(spec[k]);
    fft_inverse(flat);
    auto f = x.open("comb_intensity.csv");
    f << "t_ps,intensity_dispersed_w,intensity_transform_limited_w\n";
    const std::size_t period = static_cast<std::size_t>(c.sim.samples_per_symbol());
    for (std::size_t n = 0; n < period && n < len; ++n)
      f << n * comb.dt_s * 1e12 << ',' << std::norm(comb.samples[n]) << ',' << std::norm(flat[n]) << '\n';
  }
  // square-comb orthogonality of the N delayed copies
  const auto sq = synthesize_comb(c.setup.grid, CombShape::Square, 1.0, s, c.sim, c.setup.budget.comb_power_w);
  std::vector<double> delays;
  for (int m = 0; m < c.setup.geom.n_neurons; ++m) delays.push_back(m * c.setup.geom.tau0_s);
  const auto g = orthogonality_gram(sq, delays, c.setup.grid.t_ui());
  const std::size_t n = delays.size();
  double err = 0.0;
  auto f = x.open("gram_square.csv");
  f << "row,col,re,im\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const cplx ref = i == j ? cplx(c.setup.budget.comb_power_w, 0.0) : cplx(0.0, 0.0);
      err = std::max(err, std::abs(g[i * n + j] - ref));
      f << i << ',' << j << ',' << g[i * n + j].real() << ',' << g[i * n + j].imag() << '\n';
    }
  x.check("square comb gram max |G - P_c I| (W)", err, 0.0, 1e-10 * c.setup.budget.comb_power_w, "le");
}

void link_single(Ctx& x) {
  const auto& c = x.cfg;
  SimConfig sim = c.sim;
  sim.rng_seed = x.seed("link", 1);
  const auto r = simulate_link(sim, c.setup);
  const BesselFilterSpec filt{5, sim.cutoff_hz};
  const double neb = noise_equivalent_bandwidth(filt);
  const auto ns = noise_sigmas(r.i_cm_mean_a, neb, c.setup.noise.i_n_a_sqrt_hz);
  auto f = x.open("link_single.csv");
  f << "sigma_delta,snr_db,enob,q_factor,corr,full_scale_a,i_cm_a,f_neb_hz,sigma_shot_a,sigma_thermal_a\n";
  f << r.sd.sigma_delta << ',' << r.sd.snr_db << ',' << r.sd.enob << ',' << r.sd.q_factor << ','
    << r.corr_pooled << ',' << r.full_scale_a << ',' << r.i_cm_mean_a << ',' << neb << ','
    << ns.shot << ',' << ns.thermal << '\n';
  const auto& t = sim.toggles;
  const bool full = t.opt_lw && t.rf_lw && t.rin && t.shot && t.thermal && t.gd_mismatch &&
                    t.dcs_dispersion && t.star_phases && t.modulator_slope;
  if (full && std::abs(sim.cutoff_hz - 12.5e9) < 1.0) {
    x.check("sigma_delta (all impairments)", r.sd.sigma_delta, 0.061, 0.010, "eq");
    x.check("SNR dB (all impairments)", r.sd.snr_db, 21.3, 1.5, "eq");
    x.check("ENOB (all impairments)", r.sd.enob, 3.2, 0.25, "eq");
  }
  if (std::abs(sim.cutoff_hz - 12.5e9) < 1.0) {
    const auto ref = noise_sigmas(532.7e-6, neb, 10e-12);
    x.check("sigma_shot A at 532.7 uA", ref.shot, 1.47e-6, 0.0147e-6, "eq");
    x.check("sigma_thermal A at 10 pA/rtHz", ref.thermal, 1.13e-6, 0.0113e-6, "eq");
  }
}

void sweep_fwhm(Ctx& x) {
  const auto& c = x.cfg;
  const SimConfig base = sweep_base(c, c.fwhm, x.seed("sweep", 1));
  const auto recs = sweep(SweepAxis::Fwhm, c.fwhm.points, base, c.setup, x.spec.repeats, x.spec.jobs);
  write_sweep(x, "sweep_fwhm.csv", {{SweepAxis::Fwhm, recs}});
  const auto m = mean_by_value(recs);
  if (std::abs(c.fwhm.cutoff_hz - 6.25e9) < 1.0) {
    if (auto r = at(m, 0.75)) x.check("sigma_delta at FWHM 0.75", r->sigma_delta, 0.073, 0.015, "eq");
    if (auto r = at(m, 1.0)) x.check("sigma_delta at FWHM 1.0", r->sigma_delta, 0.032, 0.010, "eq");
    if (auto r = at(m, 1.5)) x.check("sigma_delta at FWHM 1.5", r->sigma_delta, 0.010, 0.0, "le");
  }
}

void sweep_cutoff(Ctx& x) {
  const auto& c = x.cfg;
  const SimConfig base = sweep_base(c, c.cutoff, x.seed("sweep", 1));
  const auto recs = sweep(SweepAxis::Cutoff, c.cutoff.points, base, c.setup, x.spec.repeats, x.spec.jobs);
  write_sweep(x, "sweep_cutoff.csv", {{SweepAxis::Cutoff, recs}});
  const auto m = mean_by_value(recs);
  if (std::abs(c.cutoff.fwhm_rel - 1.5) < 1e-12) {
    if (auto r = at(m, 7.5e9)) x.check("sigma_delta at 7.5 GHz", r->sigma_delta, 0.006, 0.0, "le");
    if (auto r = at(m, 12.5e9)) x.check("sigma_delta at 12.5 GHz", r->sigma_delta, 0.018, 0.008, "eq");
  }
  const double h = std::abs(bessel_response(BesselFilterSpec{5, 12.5e9}, 25e9));
  x.check("Bessel |H(25 GHz)| dB at 12.5 GHz cutoff", 20.0 * std::log10(h), -14.0, 0.0, "le");
}

void sweep_linewidth(Ctx& x) {
  const auto& c = x.cfg;
  const SimConfig bo = sweep_base(c, c.lw_opt, x.seed("sweep_opt", 1));
  const SimConfig br = sweep_base(c, c.lw_rf, x.seed("sweep_rf", 2));
  const auto ro = sweep(SweepAxis::LwOpt, c.lw_opt.points, bo, c.setup, x.spec.repeats, x.spec.jobs);
  const auto rr = sweep(SweepAxis::LwRf, c.lw_rf.points, br, c.setup, x.spec.repeats, x.spec.jobs);
  write_sweep(x, "sweep_linewidth.csv", {{SweepAxis::LwOpt, ro}, {SweepAxis::LwRf, rr}});
  const auto mo = mean_by_value(ro), mr = mean_by_value(rr);
  if (auto f0 = at(mo, 0.0)) {
    if (auto r = at(mo, 1e6)) x.check("LW_opt 1 MHz / floor", r->sigma_delta / f0->sigma_delta, 1.2, 0.0, "le");
    if (auto r = at(mo, 1e7)) x.check("LW_opt 10 MHz / floor", r->sigma_delta / f0->sigma_delta, 3.0, 0.0, "ge");
  }
  if (auto f0 = at(mr, 0.0))
    if (auto r = at(mr, 1e3)) x.check("LW_RF 1 kHz / floor", r->sigma_delta / f0->sigma_delta, 1.05, 0.0, "le");
}

void sweep_power(Ctx& x) {
  const auto& c = x.cfg;
  SimConfig base = sweep_base(c, c.power, x.seed("sweep", 1));
  base.toggles.shot = base.toggles.thermal = base.toggles.rin = true;
  const auto recs = sweep(SweepAxis::Power, c.power.points, base, c.setup, x.spec.repeats, x.spec.jobs);
  write_sweep(x, "sweep_power.csv", {{SweepAxis::Power, recs}});
}

void sweep_gd(Ctx& x) {
  const auto& c = x.cfg;
  const SimConfig base = sweep_base(c, c.gd, x.seed("sweep", 1));
  const auto recs = sweep(SweepAxis::GdMismatch, c.gd.points, base, c.setup, x.spec.repeats, x.spec.jobs);
  write_sweep(x, "sweep_gdmismatch.csv", {{SweepAxis::GdMismatch, recs}});
  const auto m = mean_by_value(recs);
  if (auto f0 = at(m, 0.0)) {
    double worst = 0.0;
    for (const auto& [v, r] : m)
      if (v <= 50.0) worst = std::max(worst, r.sigma_delta / f0->sigma_delta);
    x.check("max sigma_delta ratio up to 50 fs", worst, 2.0, 0.0, "le");
  }
  if (auto r = at(m, 163.0)) x.check("|corr| at 163 fs", std::abs(r->corr), 0.1, 0.0, "le");
}

void feasibility(Ctx& x) {
  const auto& f = x.cfg.feasibility;
  const std::uint64_t s = x.seed("feasibility", 1);
  auto out = x.open("feasibility.csv");
  out << "scenario,mu,trials,fail_1pct,fail_10pct,seed,max_deviation\n";
  for (double mu : f.mu) {
    auto scns = standard_scenarios(mu, f.trials, s);
    int lo = 0, hi = 0, tot = 0, worst_success_pct = 100;
    for (auto& sc : scns) {
      sc.n_units = f.n_units;
      sc.q_count = f.q_count;
      SolverConfig sv = f.solver;
      sv.seed = derive_seed(sc.seed, 77);
      const auto r = feasibility_experiment(sc, sv, x.spec.jobs);
      out << r.scenario << ',' << r.mu << ',' << r.trials << ',' << r.fail_lo << ',' << r.fail_hi << ','
          << r.seed << ',' << r.max_deviation << '\n';
      lo += r.fail_lo;
      hi += r.fail_hi;
      tot += r.trials;
      worst_success_pct = std::min(worst_success_pct, 100 - (100 * r.fail_lo + r.trials - 1) / r.trials);
    }
    std::ostringstream tag;
    tag << "mu " << mu;
    if (std::abs(mu - 0.7) < 1e-12) x.check(tag.str() + " failures >1%", lo, 0, 0, "le");
    if (std::abs(mu - 0.8) < 1e-12) {
      x.check(tag.str() + " failure rate >1%", double(lo) / tot, 0.01, 0, "le");
      x.check(tag.str() + " failures >10%", hi, 0, 0, "le");
    }
    if (std::abs(mu - 0.95) < 1e-12) x.check(tag.str() + " worst-scenario success %", worst_success_pct, 90, 0, "ge");
  }
}

EqualizerBench bench_for(Ctx& x) {
  const auto& e = x.cfg.equalizer;
  return make_bench(e.frontend, e.dataset, x.seed("dataset", 1));
}

void write_network(Ctx& x, const std::string& stem, const TrainedEqualizer& t) {
  const LossKind k = t.cfg.kind == EqualizerKind::Analog ? LossKind::AnalogMse : LossKind::DigitalPreconditioned;
  std::ofstream(x.path(stem + "_network.json")) << network_to_json(t.net, t.cfg.train, k) << '\n';
  write_loss_csv(x.path(stem + "_loss.csv"), t.history);
}

EqualizerConfig seeded(Ctx& x, EqualizerConfig ec, const std::string& label, std::uint64_t stream) {
  ec.train.seed = x.seed(label + "_train", stream);
  ec.init_seed = x.seed(label + "_init", stream + 100);
  return ec;
}

void train_analog(Ctx& x) {
  const auto b = bench_for(x);
  write_dataset_csv(x.path("dataset_train.csv"), b.train);
  const auto& e = x.cfg.equalizer;
  const auto t = train_equalizer(b, seeded(x, e.analog, "analog", 10));
  const auto tn = train_equalizer(b, seeded(x, e.analog_noisy, "analog_noisy", 11));
  write_network(x, "analog", t);
  write_network(x, "analog_noisy", tn);
  const auto r0 = evaluate_equalizer(t.net, b.grouped, EqualizerKind::Analog, t.cfg.train.target_scale, 0.0,
                                     x.seed("eval", 20), "analog-noiseless");
  const auto r1 = evaluate_equalizer(tn.net, b.grouped, EqualizerKind::Analog, tn.cfg.train.target_scale, 1.0,
                                     x.seed("eval_noisy", 21), "analog-noisy");
  write_enob_csv(x.path("enob_analog.csv"), {r0, r1});
  x.check("analog noiseless mean ENOB", r0.mean_enob, 5.0, 0.0, "ge");
}

void train_digital(Ctx& x) {
  const auto b = bench_for(x);
  write_dataset_csv(x.path("dataset_train.csv"), b.train);
  const auto t = train_equalizer(b, seeded(x, x.cfg.equalizer.digital, "digital", 12));
  write_network(x, "digital", t);
  const auto r0 = evaluate_equalizer(t.net, b.grouped, EqualizerKind::Digital, 1.0, 0.0, x.seed("eval", 20),
                                     "digital-noiseless");
  const auto r1 = evaluate_equalizer(t.net, b.grouped, EqualizerKind::Digital, 1.0, 1.0,
                                     x.seed("eval_noisy", 21), "digital-noisy");
  write_enob_csv(x.path("enob_digital.csv"), {r0, r1});
  x.check("digital ENOB noiseless - noisy", r0.mean_enob - r1.mean_enob, 0.5, 0.0, "le");
  x.check("digital max ENOB", std::max(*std::max_element(r0.enob.begin(), r0.enob.end()),
                                       *std::max_element(r1.enob.begin(), r1.enob.end())),
          5.0, 0.0, "le");
}

void bench_enob(Ctx& x) {
  const auto b = bench_for(x);
  const auto& e = x.cfg.equalizer;
  const auto ta = train_equalizer(b, seeded(x, e.analog, "analog", 10));
  const auto tn = train_equalizer(b, seeded(x, e.analog_noisy, "analog_noisy", 11));
  const auto td = train_equalizer(b, seeded(x, e.digital, "digital", 12));
  const auto un = evaluate_unequalized(b.grouped);
  const auto a0 = evaluate_equalizer(ta.net, b.grouped, EqualizerKind::Analog, ta.cfg.train.target_scale, 0.0,
                                     x.seed("eval", 20), "equalized-analog-noiseless");
  const auto a1 = evaluate_equalizer(tn.net, b.grouped, EqualizerKind::Analog, tn.cfg.train.target_scale, 1.0,
                                     x.seed("eval_noisy", 21), "equalized-analog-noisy");
  const auto d0 = evaluate_equalizer(td.net, b.grouped, EqualizerKind::Digital, 1.0, 0.0, x.seed("eval", 20),
                                     "equalized-digital-noiseless");
  const auto d1 = evaluate_equalizer(td.net, b.grouped, EqualizerKind::Digital, 1.0, 1.0,
                                     x.seed("eval_noisy", 21), "equalized-digital-noisy");
  write_enob_csv(x.path("enob_bench.csv"), {un, a0, a1, d0, d1});
  const double top = e.dataset.f_hi - (e.dataset.f_hi - e.dataset.f_lo) / 3.0;
  x.check("analog noiseless mean ENOB", a0.mean_enob, 5.0, 0.0, "ge");
  x.check("top-third ENOB gain, equalized vs unequalized",
          band_mean_enob(a0, top) - band_mean_enob(un, top), 1.0, 0.0, "ge");
  x.check("digital ENOB noiseless - noisy", d0.mean_enob - d1.mean_enob, 0.5, 0.0, "le");
  x.check("digital max ENOB", std::max(*std::max_element(d0.enob.begin(), d0.enob.end()),
                                       *std::max_element(d1.enob.begin(), d1.enob.end())),
          5.0, 0.0, "le");
}

void noise_curve(Ctx& x) {
  const auto b = bench_for(x);
  const auto& e = x.cfg.equalizer;
  const auto tn = train_equalizer(b, seeded(x, e.analog_noisy, "analog_noisy", 11));
  const auto td = train_equalizer(b, seeded(x, e.digital, "digital", 12));
  const auto ca = noise_robustness_curve(tn.net, b.grouped.inputs, b.grouped.ideal, e.noise_scales,
                                         equalizer_readout(EqualizerKind::Analog, tn.cfg.train.target_scale),
                                         x.seed("curve_analog", 30));
  const auto cd = noise_robustness_curve(td.net, b.grouped.inputs, b.grouped.ideal, e.noise_scales,
                                         equalizer_readout(EqualizerKind::Digital, 1.0),
                                         x.seed("curve_digital", 31));
  auto f = x.open("noise_curve.csv");
  f << "network,scale,mean_snr_db,enob\n";
  for (const auto& p : ca) f << "analog," << p.scale << ',' << p.mean_snr_db << ',' << enob_from_snr(p.mean_snr_db) << '\n';
  for (const auto& p : cd) f << "digital," << p.scale << ',' << p.mean_snr_db << ',' << enob_from_snr(p.mean_snr_db) << '\n';
  try {
    x.check("analog SNR dB per noise doubling", -snr_slope_per_doubling(ca, 1.0, 4.0), 6.0, 1.0, "eq");
  } catch (const std::invalid_argument&) {
  }
}

using Runner = std::function<void(Ctx&)>;

const std::vector<std::pair<std::string, Runner>>& registry() {
  static const std::vector<std::pair<std::string, Runner>> r = {
      {"comb-demo", comb_demo},         {"link-single", link_single},
      {"sweep-fwhm", sweep_fwhm},       {"sweep-cutoff", sweep_cutoff},
      {"sweep-linewidth", sweep_linewidth}, {"sweep-power", sweep_power},
      {"sweep-gdmismatch", sweep_gd},   {"feasibility", feasibility},
      {"train-analog", train_analog},   {"train-digital", train_digital},
      {"bench-enob", bench_enob},       {"noise-curve", noise_curve},
  };
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

bool Check::pass() const {
  if (kind == "le") return value <= target + tol;
  if (kind == "ge") return value >= target - tol;
  return std::abs(value - target) <= tol;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> n = [] {
    std::vector<std::string> v;
    for (const auto& [k, f] : registry()) v.push_back(k);
    return v;
  }();
  return n;
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const RunConfig& cfg) {
  const Runner* run = nullptr;
  for (const auto& [k, f] : registry())
    if (k == spec.name) run = &f;
  if (!run) throw unknown_experiment("unknown experiment: " + spec.name);
  if (spec.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  if (spec.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  fs::create_directories(spec.out_dir);

  Ctx x{spec, cfg, {}, json::object()};
  const auto t0 = std::chrono::steady_clock::now();
  (*run)(x);
  x.out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    std::ofstream f(fs::path(spec.out_dir) / "summary.txt");
    f << "experiment: " << spec.name << "\nseed: " << spec.seed << "\n\n";
    if (x.out.checks.empty()) f << "no reference comparisons for this configuration\n";
    for (const auto& c : x.out.checks) {
      const std::string rel = c.kind == "le" ? "<=" : c.kind == "ge" ? ">=" : "=";
      f << (c.pass() ? "PASS " : "FAIL ") << c.metric << ": " << fmt(c.value) << " (reference " << rel
        << ' ' << fmt(c.target);
      if (c.kind == "eq") f << " +/- " << fmt(c.tol);
      f << ")\n";
    }
  }
  {
    json m;
    m["experiment"] = spec.name;
    m["version"] = ODDM_VERSION;
    m["seed"] = spec.seed;
    m["derived_seeds"] = x.seeds;
    m["repeats"] = spec.repeats;
    m["jobs"] = spec.jobs;
    const std::string norm = cfg.normalized.dump();
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(norm);
    m["config_hash"] = h.str();
    m["config_path"] = spec.config_path;
    m["config"] = cfg.normalized;
    json tol = json::array();
    for (const auto& c : x.out.checks)
      tol.push_back({{"metric", c.metric}, {"value", c.value}, {"target", c.target}, {"tol", c.tol},
                     {"kind", c.kind}, {"pass", c.pass()}});
    m["tolerances"] = tol;
    m["files"] = x.out.files;
    m["wall_time_s"] = x.out.wall_time_s;
    std::ofstream(fs::path(spec.out_dir) / "manifest.json") << m.dump(2) << '\n';
  }
  return x.out;
}

}  // namespace oddm
