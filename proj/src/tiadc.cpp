#include "oddm/tiadc.hpp"
#include "oddm/link.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace oddm {

void FrontEndConfig::validate() const {
  if (n_channels < 1) throw std::invalid_argument("n_channels must be >= 1");
  if (!(channel_rate > 0)) throw std::invalid_argument("channel_rate must be > 0");
  if (std::abs(aggregate_rate - n_channels * channel_rate) > 1e-9 * aggregate_rate)
    throw std::invalid_argument("aggregate_rate must equal n_channels * channel_rate");
  if (!(drive_fraction > 0 && drive_fraction <= 1))
    throw std::invalid_argument("drive_fraction must be in (0, 1]");
  if (!(frontend_noise_std >= 0)) throw std::invalid_argument("frontend_noise_std must be >= 0");
  if (!(bandwidth_hz > 0)) throw std::invalid_argument("bandwidth_hz must be > 0");
}

double Tone::operator()(double t) const { return std::sin(2.0 * kPi * freq_hz * t + phase); }

std::vector<double> sample_frontend(const FrontEndConfig& cfg, const Tone& x, std::size_t n_samples,
                                    std::uint64_t seed) {
  cfg.validate();
  if (x.freq_hz > cfg.bandwidth_hz * (1 + 1e-12))
    throw std::invalid_argument("tone above the front-end bandwidth");
  const double a = 0.5 * kPi * cfg.drive_fraction;
  std::vector<double> y(n_samples);
  for (std::size_t n = 0; n < n_samples; ++n) y[n] = std::sin(a * x(n / cfg.aggregate_rate));
  std::vector<double> s = y;
  for (std::size_t n = 0; n < n_samples; ++n)
    for (std::size_t l = 0; l < cfg.leakage_kernel.size(); ++l)
      if (n >= l + 1) s[n] += cfg.leakage_kernel[l] * y[n - l - 1];
  if (cfg.frontend_noise_std > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, cfg.frontend_noise_std);
    for (auto& v : s) v += g(rng);
  }
  return s;
}

std::vector<std::vector<double>> deinterleave(const std::vector<double>& aggregate, int n_channels) {
  if (n_channels < 1) throw std::invalid_argument("n_channels must be >= 1");
  std::vector<std::vector<double>> out(n_channels);
  for (std::size_t n = 0; n < aggregate.size(); ++n) out[n % n_channels].push_back(aggregate[n]);
  return out;
}

std::vector<double> assemble_taps(const std::vector<double>& aggregate, long center, double v_pi,
                                  double full_scale, bool* edge) {
  if (!(full_scale > 0)) throw std::invalid_argument("full_scale must be > 0");
  std::vector<double> t(kTaps);
  bool flagged = false;
  const long half = kTaps / 2;
  for (long j = 0; j < kTaps; ++j) {
    const long n = center + j - half;
    double s = 0.0;
    if (n < 0 || n >= static_cast<long>(aggregate.size()))
      flagged = true;
    else
      s = aggregate[n];
    t[j] = 0.5 * v_pi * (1.0 + std::clamp(s / full_scale, -1.0, 1.0));
  }
  if (edge) *edge = flagged;
  return t;
}

std::vector<double> frequency_grid(const DatasetConfig& d) {
  if (d.n_freqs < 2) throw std::invalid_argument("n_freqs must be >= 2");
  const double step = (d.f_hi - d.f_lo) / (d.n_freqs - 1);
  std::vector<double> f;
  if (!d.validation_grid)
    for (int i = 0; i < d.n_freqs; ++i) f.push_back(d.f_lo + i * step);
  else
    for (int i = 0; i + 1 < d.n_freqs; ++i) f.push_back(d.f_lo + (i + 0.5) * step);
  return f;
}

EqualizerDataset build_dataset(const FrontEndConfig& cfg, const DatasetConfig& d, std::uint64_t seed) {
  cfg.validate();
  if (d.channel < 0 || d.channel >= cfg.n_channels) throw std::invalid_argument("channel out of range");
  EqualizerDataset ds;
  ds.frequencies = frequency_grid(d);
  ds.samples_per_waveform = d.samples_per_waveform;
  ds.channel = d.channel;
  const int half = kTaps / 2;
  // leading margin so the first center has a full, settled neighborhood
  const long lead = 2L * cfg.n_channels;
  const std::size_t n_agg = static_cast<std::size_t>(lead + (d.samples_per_waveform + 1) * cfg.n_channels + half + 1);
  for (std::size_t fi = 0; fi < ds.frequencies.size(); ++fi) {
    std::mt19937_64 rng(derive_seed(seed, 0x7100 + fi));
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    const Tone x{ds.frequencies[fi], u(rng)};
    const auto agg = sample_frontend(cfg, x, n_agg, derive_seed(seed, 0x7200 + fi));
    for (int k = 0; k < d.samples_per_waveform; ++k) {
      const long n = lead + static_cast<long>(k) * cfg.n_channels + d.channel;
      TapRow r;
      r.freq_hz = x.freq_hz;
      r.sample_index = k;
      r.taps = assemble_taps(agg, n, d.v_pi, d.full_scale, &r.edge);
      r.target = x(n / cfg.aggregate_rate);
      ds.rows.push_back(std::move(r));
    }
  }
  return ds;
}

void write_dataset_csv(const std::string& path, const EqualizerDataset& ds) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "# channel: " << ds.channel << "\n# samples_per_waveform: " << ds.samples_per_waveform << "\n";
  f << "frequency_hz,sample_index";
  for (int j = 0; j < kTaps; ++j) f << ",tap" << j;
  f << ",target,edge\n";
  f.precision(17);
  for (const auto& r : ds.rows) {
    f << r.freq_hz << ',' << r.sample_index;
    for (double t : r.taps) f << ',' << t;
    f << ',' << r.target << ',' << (r.edge ? 1 : 0) << '\n';
  }
}

EqualizerDataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  EqualizerDataset ds;
  std::string line;
  bool header = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# channel:", 0) == 0) ds.channel = std::stoi(line.substr(10));
      if (line.rfind("# samples_per_waveform:", 0) == 0) ds.samples_per_waveform = std::stoi(line.substr(23));
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != kTaps + 4) throw std::runtime_error("malformed dataset row in " + path);
    TapRow r;
    r.freq_hz = v[0];
    r.sample_index = static_cast<int>(v[1]);
    r.taps.assign(v.begin() + 2, v.begin() + 2 + kTaps);
    r.target = v[2 + kTaps];
    r.edge = v[3 + kTaps] != 0.0;
    if (ds.frequencies.empty() || ds.frequencies.back() != r.freq_hz) ds.frequencies.push_back(r.freq_hz);
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

int flash_decode(const std::vector<bool>& outputs) {
  return static_cast<int>(std::count(outputs.begin(), outputs.end(), true));
}

int bubble_errors(const std::vector<bool>& outputs) {
  int b = 0;
  for (std::size_t j = 1; j < outputs.size(); ++j)
    if (outputs[j] && !outputs[j - 1]) ++b;
  return b;
}

std::vector<double> flash_targets(double x, const FlashCode& fc) {
  std::vector<double> t(fc.levels);
  for (int p = 0; p < fc.levels; ++p) t[p] = x > fc.threshold(p) ? 1.0 : 0.0;
  return t;
}

namespace {

struct Fit {
  double signal_var = 0.0;
  double error_var = 0.0;
};

Fit align(const std::vector<double>& out, const std::vector<double>& ref, int max_delay) {
  Fit best;
  best.error_var = INFINITY;
  for (int d = -max_delay; d <= max_delay; ++d) {
    std::vector<double> a, r;
    for (long i = 0; i < static_cast<long>(out.size()); ++i) {
      const long j = i + d;
      if (j < 0 || j >= static_cast<long>(ref.size())) continue;
      a.push_back(out[i]);
      r.push_back(ref[j]);
    }
    if (a.size() < 3) continue;
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mr = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double saa = 0, sar = 0, srr = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      saa += (a[i] - ma) * (a[i] - ma);
      sar += (a[i] - ma) * (r[i] - mr);
      srr += (r[i] - mr) * (r[i] - mr);
    }
    if (!(srr > 1e-24 * n * (1.0 + mr * mr))) throw std::invalid_argument("reference has zero variance");
    const double g = saa > 0 ? sar / saa : 0.0;
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double dd = g * (a[i] - ma) - (r[i] - mr);
      e += dd * dd;
    }
    if (e / n < best.error_var) best = {srr / n, e / n};
  }
  return best;
}

double snr_of(const Fit& f) {
  if (f.error_var <= 0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(f.signal_var / f.error_var));
}

}  // namespace

EnobReport evaluate_enob(const std::vector<std::vector<double>>& outputs,
                         const std::vector<std::vector<double>>& ideal,
                         const std::vector<double>& freqs, const std::string& scenario,
                         int max_delay) {
  if (outputs.size() != ideal.size() || outputs.size() != freqs.size())
    throw std::invalid_argument("output/reference/frequency count mismatch");
  EnobReport r;
  r.scenario = scenario;
  double sv = 0.0, ev = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const Fit f = align(outputs[i], ideal[i], max_delay);
    const double snr = snr_of(f);
    r.freq_hz.push_back(freqs[i]);
    r.snr_db.push_back(snr);
    r.enob.push_back(enob_from_snr(snr));
    sv += f.signal_var;
    ev += f.error_var;
  }
  r.mean_snr_db = ev > 0 ? std::min(kSnrCapDb, 10.0 * std::log10(sv / ev)) : kSnrCapDb;
  r.mean_enob = enob_from_snr(r.mean_snr_db);
  return r;
}

void write_enob_csv(const std::string& path, const std::vector<EnobReport>& reports) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "frequency_ghz,snr_db,enob,scenario\n";
  f.precision(8);
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.freq_hz.size(); ++i)
      f << r.freq_hz[i] * 1e-9 << ',' << r.snr_db[i] << ',' << r.enob[i] << ',' << r.scenario << '\n';
}

GroupedInputs group_by_frequency(const EqualizerDataset& ds, double v_pi, double full_scale) {
  GroupedInputs g;
  for (const auto& r : ds.rows) {
    if (g.freqs.empty() || g.freqs.back() != r.freq_hz) {
      g.freqs.push_back(r.freq_hz);
      g.inputs.emplace_back();
      g.ideal.emplace_back();
      g.raw_center.emplace_back();
    }
    g.inputs.back().push_back(r.taps);
    g.ideal.back().push_back(r.target);
    // invert the tap voltage mapping for the center tap
    g.raw_center.back().push_back((2.0 * r.taps[kTaps / 2] / v_pi - 1.0) * full_scale);
  }
  return g;
}

Network make_equalizer_net(const EqualizerConfig& ec) {
  if (ec.hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  Network net;
  const double s_in = nominal_link_noise(kTaps, ec.hidden) * ec.noise_scale;
  const double s_out = nominal_link_noise(ec.hidden, ec.hidden) * ec.noise_scale;
  net.layers.push_back(LayerNet::make(kTaps, ec.hidden, derive_seed(ec.init_seed, 1), s_in));
  const int n_out = ec.kind == EqualizerKind::Analog ? 1 : FlashCode{}.levels;
  LayerNet out = LayerNet::make(ec.hidden, n_out, derive_seed(ec.init_seed, 2), s_out,
                                Activation::Identity);
  out.star_fanout = std::max(n_out, ec.hidden);
  net.layers.push_back(std::move(out));
  return net;
}

Dataset to_training_set(const EqualizerDataset& ds, EqualizerKind kind) {
  Dataset d;
  const FlashCode fc;
  for (const auto& r : ds.rows) {
    d.inputs.push_back(r.taps);
    if (kind == EqualizerKind::Analog)
      d.targets.push_back({r.target});
    else
      d.targets.push_back(flash_targets(r.target, fc));
  }
  return d;
}

Readout equalizer_readout(EqualizerKind kind, double target_scale) {
  if (kind == EqualizerKind::Analog)
    return [target_scale](const std::vector<double>& o) { return o[0] / target_scale; };
  return [](const std::vector<double>& o) {
    std::vector<bool> b(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) b[i] = o[i] > 0.0;
    return FlashCode{}.level(flash_decode(b));
  };
}

EnobReport evaluate_equalizer(const Network& net, const GroupedInputs& g, EqualizerKind kind,
                              double target_scale, double noise_scale, std::uint64_t seed,
                              const std::string& scenario) {
  const Readout ro = equalizer_readout(kind, target_scale);
  std::vector<std::vector<double>> outs;
  long bubbles = 0, total = 0;
  for (std::size_t i = 0; i < g.inputs.size(); ++i) {
    const auto fc = forward(net, g.inputs[i], noise_scale > 0, derive_seed(seed, i), noise_scale);
    std::vector<double> est(fc.batch);
    for (std::size_t s = 0; s < fc.batch; ++s) {
      const auto o = fc.output(s);
      est[s] = ro(o);
      if (kind == EqualizerKind::Digital) {
        std::vector<bool> b(o.size());
        for (std::size_t k = 0; k < o.size(); ++k) b[k] = o[k] > 0.0;
        bubbles += bubble_errors(b) > 0 ? 1 : 0;
        ++total;
      }
    }
    outs.push_back(std::move(est));
  }
  EnobReport r = evaluate_enob(outs, g.ideal, g.freqs, scenario, 0);
  r.bubble_rate = total > 0 ? static_cast<double>(bubbles) / total : 0.0;
  return r;
}

EnobReport evaluate_unequalized(const GroupedInputs& g) {
  return evaluate_enob(g.raw_center, g.ideal, g.freqs, "unequalized", 0);
}

EqualizerBench make_bench(const FrontEndConfig& fe, const DatasetConfig& d, std::uint64_t seed) {
  EqualizerBench b;
  b.dataset = d;
  b.dataset.validation_grid = false;
  b.train = build_dataset(fe, b.dataset, derive_seed(seed, 1));
  DatasetConfig v = b.dataset;
  v.validation_grid = true;
  b.valid = build_dataset(fe, v, derive_seed(seed, 2));
  b.grouped = group_by_frequency(b.valid, d.v_pi, d.full_scale);
  return b;
}

TrainedEqualizer train_equalizer(const EqualizerBench& bench, const EqualizerConfig& ec) {
  TrainedEqualizer t;
  t.cfg = ec;
  t.net = make_equalizer_net(ec);
  const LossKind kind = ec.kind == EqualizerKind::Analog ? LossKind::AnalogMse : LossKind::DigitalPreconditioned;
  t.history = train(t.net, to_training_set(bench.train, ec.kind), ec.train, kind);
  return t;
}

double band_mean_enob(const EnobReport& r, double f_from_hz) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < r.freq_hz.size(); ++i)
    if (r.freq_hz[i] >= f_from_hz) {
      s += r.enob[i];
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no frequencies in the requested band");
  return s / n;
}

}  // namespace oddm
