#include "oddm/ann.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace oddm {
namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double NeuronChain::activate(double current_a) const {
  if (activation == Activation::Identity) return current_a;
  return v_pi * logistic(steepness_per_amp() * current_a);
}

double NeuronChain::derivative(double current_a) const {
  if (activation == Activation::Identity) return 1.0;
  const double s = logistic(steepness_per_amp() * current_a);
  return v_pi * steepness_per_amp() * s * (1.0 - s);
}

void NeuronChain::validate() const {
  if (!(v_pi > 0)) throw std::invalid_argument("v_pi must be > 0");
  if (!(tia_gain_rad_per_ma > 0)) throw std::invalid_argument("tia_gain_rad_per_ma must be > 0");
}

LayerNet LayerNet::make(int n_up, int n_down, std::uint64_t seed, double noise_sigma,
                        Activation act, UnitVariant variant) {
  LayerNet l;
  l.n_up = n_up;
  l.n_down = n_down;
  l.variant = variant;
  l.noise_sigma = noise_sigma;
  l.chain.activation = act;
  CombGrid grid;
  grid.q_count = 4 * n_up - 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int p = 0; p < n_down; ++p) {
    DemodCascade c = DemodCascade::make(n_up, variant, grid.tau0(), l.split_ratio);
    std::vector<double> th(c.n_params());
    for (auto& t : th) t = -u(rng);
    c.set_params(th);
    l.cascades.push_back(std::move(c));
  }
  l.gamma.resize(static_cast<std::size_t>(n_up) * n_down);
  for (auto& g : l.gamma) g = -u(rng);
  l.validate();
  return l;
}

double LayerNet::prefactor() const {
  return photocurrent_prefactor(budget, n_up, star_fanout > 0 ? star_fanout : n_down);
}

int LayerNet::n_params() const {
  int n = 0;
  for (const auto& c : cascades) n += c.n_params();
  return n;
}

void LayerNet::validate() const {
  if (n_up < 1 || n_down < 1) throw std::invalid_argument("layer dimensions must be >= 1");
  if (static_cast<int>(cascades.size()) != n_down)
    throw std::invalid_argument("one cascade per downstream neuron required");
  for (const auto& c : cascades) {
    if (c.n_units() != n_up) throw std::invalid_argument("cascade length must equal n_up");
    c.validate();
  }
  if (gamma.size() != static_cast<std::size_t>(n_up) * n_down)
    throw std::invalid_argument("gamma size must be n_up * n_down");
  if (!(noise_sigma >= 0)) throw std::invalid_argument("noise_sigma must be >= 0");
  chain.validate();
}

double nominal_link_noise(int n_up, int n_ref, double sigma_ref) {
  if (n_up < 1 || n_ref < 1) throw std::invalid_argument("fan-in must be >= 1");
  return sigma_ref * std::sqrt(static_cast<double>(n_up) / n_ref);
}

int Network::n_params() const {
  int n = 0;
  for (const auto& l : layers) n += l.n_params();
  return n;
}

std::vector<double> Network::params() const {
  std::vector<double> p;
  for (const auto& l : layers)
    for (const auto& c : l.cascades) {
      const auto q = c.params();
      p.insert(p.end(), q.begin(), q.end());
    }
  return p;
}

void Network::set_params(const std::vector<double>& p) {
  if (static_cast<int>(p.size()) != n_params())
    throw std::invalid_argument("parameter vector length mismatch");
  std::size_t i = 0;
  for (auto& l : layers)
    for (auto& c : l.cascades) {
      const int n = c.n_params();
      c.set_params(std::vector<double>(p.begin() + i, p.begin() + i + n));
      i += n;
    }
  ++version_;
}

void Network::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (i > 0 && layers[i].n_up != layers[i - 1].n_down)
      throw std::invalid_argument("layer " + std::to_string(i) + " fan-in does not match");
  }
}

std::vector<double> ForwardCache::output(std::size_t sample) const {
  const auto& yl = y.back();
  const std::size_t n = yl.size() / batch;
  return std::vector<double>(yl.begin() + sample * n, yl.begin() + (sample + 1) * n);
}

ForwardCache forward(const Network& net, const std::vector<std::vector<double>>& inputs,
                     bool noise_on, std::uint64_t seed, double noise_scale) {
  net.validate();
  ForwardCache fc;
  fc.version = net.version();
  fc.batch = inputs.size();
  const std::size_t nl = net.layers.size();
  fc.coeffs.resize(nl);
  fc.phi.resize(nl);
  fc.u.resize(nl);
  fc.y.resize(nl);
  const double vpi_in = net.layers.front().chain.v_pi;

  // first-layer phases from the input voltages
  const int n_in = net.n_inputs();
  fc.phi[0].resize(fc.batch * n_in);
  for (std::size_t s = 0; s < fc.batch; ++s) {
    if (static_cast<int>(inputs[s].size()) != n_in)
      throw std::invalid_argument("input vector length mismatch");
    for (int m = 0; m < n_in; ++m) fc.phi[0][s * n_in + m] = kPi * inputs[s][m] / vpi_in;
  }

  for (std::size_t li = 0; li < nl; ++li) {
    const LayerNet& l = net.layers[li];
    auto& co = fc.coeffs[li];
    co.resize(l.n_down);
    for (int p = 0; p < l.n_down; ++p) co[p] = cascade_coefficients(l.cascades[p]);
    std::vector<cplx> eg(l.gamma.size());
    for (std::size_t i = 0; i < eg.size(); ++i) eg[i] = std::polar(1.0, l.gamma[i]);
    const double pref = l.prefactor();
    auto& u = fc.u[li];
    auto& y = fc.y[li];
    u.resize(fc.batch * l.n_down);
    y.resize(fc.batch * l.n_down);
    const double sigma = noise_on ? l.noise_sigma * noise_scale : 0.0;
    std::vector<cplx> ephi(l.n_up);
    for (std::size_t s = 0; s < fc.batch; ++s) {
      for (int m = 0; m < l.n_up; ++m) ephi[m] = std::polar(1.0, fc.phi[li][s * l.n_up + m]);
      std::mt19937_64 rng(derive_seed(seed, (static_cast<std::uint64_t>(li) << 40) | s));
      std::normal_distribution<double> g(0.0, 1.0);
      for (int p = 0; p < l.n_down; ++p) {
        double acc = 0.0;
        const cplx* a = co[p].data();
        const cplx* e = eg.data() + static_cast<std::size_t>(p) * l.n_up;
        for (int m = 0; m < l.n_up; ++m) acc += std::imag(std::conj(a[m]) * ephi[m] * e[m]);
        if (sigma > 0) acc += sigma * g(rng);
        u[s * l.n_down + p] = acc;
        y[s * l.n_down + p] = l.chain.activation == Activation::Identity
                                  ? acc
                                  : l.chain.activate(pref * acc);
      }
    }
    if (li + 1 < nl) {
      const double vpi = l.chain.v_pi;
      fc.phi[li + 1].resize(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) fc.phi[li + 1][i] = kPi * y[i] / vpi;
    }
  }
  return fc;
}

std::vector<double> backward(const Network& net, const ForwardCache& cache,
                             const std::vector<std::vector<double>>& d_out) {
  if (cache.version != net.version())
    throw invalid_state("backward: forward cache is stale (parameters changed)");
  if (d_out.size() != cache.batch) throw std::invalid_argument("gradient batch size mismatch");
  const std::size_t nl = net.layers.size();
  std::vector<double> grad;
  std::vector<std::vector<double>> layer_grads(nl);

  // dL/dy of the current layer, [sample * n_down + p]
  std::vector<double> gy(cache.batch * net.n_outputs());
  for (std::size_t s = 0; s < cache.batch; ++s) {
    if (static_cast<int>(d_out[s].size()) != net.n_outputs())
      throw std::invalid_argument("output gradient length mismatch");
    for (int p = 0; p < net.n_outputs(); ++p) gy[s * net.n_outputs() + p] = d_out[s][p];
  }

  for (std::size_t li = nl; li-- > 0;) {
    const LayerNet& l = net.layers[li];
    const double pref = l.prefactor();
    std::vector<cplx> eg(l.gamma.size());
    for (std::size_t i = 0; i < eg.size(); ++i) eg[i] = std::polar(1.0, l.gamma[i]);
    std::vector<std::vector<cplx>> ga(l.n_down, std::vector<cplx>(l.n_up, 0.0));
    std::vector<double> gphi(cache.batch * l.n_up, 0.0);
    std::vector<cplx> ephi(l.n_up);
    for (std::size_t s = 0; s < cache.batch; ++s) {
      for (int m = 0; m < l.n_up; ++m) ephi[m] = std::polar(1.0, cache.phi[li][s * l.n_up + m]);
      for (int p = 0; p < l.n_down; ++p) {
        const std::size_t idx = s * l.n_down + p;
        const double gu = l.chain.activation == Activation::Identity
                              ? gy[idx]
                              : gy[idx] * l.chain.derivative(pref * cache.u[li][idx]) * pref;
        if (gu == 0.0) continue;
        const cplx* a = cache.coeffs[li][p].data();
        const cplx* e = eg.data() + static_cast<std::size_t>(p) * l.n_up;
        for (int m = 0; m < l.n_up; ++m) {
          const cplx w = ephi[m] * e[m];
          // u = Im(conj(a) w): d/dRe a = Im w, d/dIm a = -Re w, d/dphi = Re(conj(a) w)
          ga[p][m] += gu * cplx(w.imag(), -w.real());
          gphi[s * l.n_up + m] += gu * std::real(std::conj(a[m]) * w);
        }
      }
    }
    auto& lg = layer_grads[li];
    for (int p = 0; p < l.n_down; ++p) {
      const auto g = cascade_coefficients_vjp(l.cascades[p], ga[p]);
      lg.insert(lg.end(), g.begin(), g.end());
    }
    if (li > 0) {
      const double k = kPi / net.layers[li - 1].chain.v_pi;
      gy.assign(gphi.size(), 0.0);
      for (std::size_t i = 0; i < gphi.size(); ++i) gy[i] = gphi[i] * k;
    }
  }
  for (auto& lg : layer_grads) grad.insert(grad.end(), lg.begin(), lg.end());
  return grad;
}

void Dataset::validate(int n_in, int n_out) const {
  if (inputs.empty()) throw std::invalid_argument("dataset is empty");
  if (inputs.size() != targets.size()) throw std::invalid_argument("inputs/targets size mismatch");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (static_cast<int>(inputs[i].size()) != n_in)
      throw std::invalid_argument("dataset input width mismatch");
    if (static_cast<int>(targets[i].size()) != n_out)
      throw std::invalid_argument("dataset target width mismatch");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (!(step > 0)) throw std::invalid_argument("step must be > 0");
  for (std::size_t i = 1; i < steepness_schedule.size(); ++i)
    if (steepness_schedule[i] < steepness_schedule[i - 1])
      throw std::invalid_argument("steepness_schedule must be non-decreasing");
  if (!steepness_schedule.empty() && static_cast<int>(steepness_schedule.size()) < epochs)
    throw std::invalid_argument("steepness_schedule shorter than epochs");
  if (!(steepness_growth >= 1.0)) throw std::invalid_argument("steepness_growth must be >= 1");
}

double TrainConfig::steepness(int epoch, const LayerNet& out_layer) const {
  if (!steepness_schedule.empty()) return steepness_schedule[epoch];
  // physical logistic slope per normalized current unit
  const double s0 = out_layer.chain.steepness_per_amp() * out_layer.prefactor();
  return s0 * std::pow(steepness_growth, epoch);
}

namespace {

// loss and dL/d(output) for one sample
double sample_loss(const std::vector<double>& out, const std::vector<double>& tgt, LossKind kind,
                   double steep, double scale, std::vector<double>* grad) {
  double l = 0.0;
  if (grad) grad->assign(out.size(), 0.0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (kind == LossKind::AnalogMse) {
      const double d = out[p] - scale * tgt[p];
      l += d * d;
      if (grad) (*grad)[p] = 2.0 * d;
    } else {
      const double s = logistic(steep * out[p]);
      const double d = s - tgt[p];
      l += d * d;
      if (grad) (*grad)[p] = 2.0 * d * steep * s * (1.0 - s);
    }
  }
  return l;
}

void check_readout_layer(const Network& net, LossKind kind) {
  if (kind == LossKind::AnalogMse && net.layers.back().chain.activation != Activation::Identity)
    throw std::invalid_argument("analog loss needs an identity output layer");
  if (kind == LossKind::DigitalPreconditioned &&
      net.layers.back().chain.activation != Activation::Identity)
    throw std::invalid_argument("digital loss thresholds the output currents; use identity output");
}

}  // namespace

double evaluate_loss(const Network& net, const Dataset& data, LossKind kind, double steepness,
                     double target_scale, bool noise_on, std::uint64_t seed) {
  data.validate(net.n_inputs(), net.n_outputs());
  check_readout_layer(net, kind);
  const auto fc = forward(net, data.inputs, noise_on, seed);
  double l = 0.0;
  for (std::size_t s = 0; s < fc.batch; ++s)
    l += sample_loss(fc.output(s), data.targets[s], kind, steepness, target_scale, nullptr);
  return l / static_cast<double>(fc.batch);
}

TrainResult train(Network& net, const Dataset& data, const TrainConfig& cfg, LossKind kind) {
  cfg.validate();
  net.validate();
  data.validate(net.n_inputs(), net.n_outputs());
  check_readout_layer(net, kind);
  const std::size_t n = data.inputs.size();
  std::vector<double> theta = net.params();
  std::vector<double> m1(theta.size(), 0.0), m2(theta.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xA11));
  TrainResult res;
  long t = 0;
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), rng);
    const double steep = cfg.steepness(ep, net.layers.back());
    double ep_loss = 0.0;
    int bi = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch, ++bi) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch));
      std::vector<std::vector<double>> xb;
      for (std::size_t i = start; i < end; ++i) xb.push_back(data.inputs[order[i]]);
      const std::uint64_t bseed =
          derive_seed(cfg.seed, (static_cast<std::uint64_t>(ep) << 32) | static_cast<std::uint64_t>(bi));
      const auto fc = forward(net, xb, cfg.noise_during_training, bseed);
      std::vector<std::vector<double>> dout(xb.size());
      double loss = 0.0;
      const double inv = 1.0 / static_cast<double>(xb.size());
      for (std::size_t s = 0; s < xb.size(); ++s) {
        loss += sample_loss(fc.output(s), data.targets[order[start + s]], kind, steep,
                            cfg.target_scale, &dout[s]);
        for (auto& g : dout[s]) g *= inv;
      }
      loss *= inv;
      const auto grad = backward(net, fc, dout);
      double gn = 0.0;
      for (double g : grad) gn += g * g;
      gn = std::sqrt(gn);
      if (!std::isfinite(loss) || !std::isfinite(gn)) {
        std::ostringstream os;
        os << "training diverged at epoch " << ep << " batch " << bi << ": loss=" << loss
           << " grad_norm=" << gn << " params=" << theta.size();
        throw training_diverged(os.str());
      }
      ++t;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        theta[i] -= cfg.step * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.eps);
      }
      net.set_params(theta);
      res.history.push_back({ep, bi, loss, gn});
      ep_loss += loss * static_cast<double>(xb.size());
    }
    res.epoch_loss.push_back(ep_loss / static_cast<double>(n));
  }
  return res;
}

std::vector<NoisePoint> noise_robustness_curve(
    const Network& net, const std::vector<std::vector<std::vector<double>>>& groups,
    const std::vector<std::vector<double>>& reference, const std::vector<double>& scales,
    const Readout& readout, std::uint64_t seed) {
  if (groups.size() != reference.size()) throw std::invalid_argument("group count mismatch");
  std::vector<NoisePoint> out;
  for (std::size_t si = 0; si < scales.size(); ++si) {
    double sig = 0.0, err = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto fc = forward(net, groups[g], scales[si] > 0,
                              derive_seed(seed, (si << 20) | g), scales[si]);
      const auto& r = reference[g];
      std::vector<double> est(fc.batch);
      for (std::size_t s = 0; s < fc.batch; ++s) est[s] = readout(fc.output(s));
      // least-squares gain/offset onto the reference
      const double nn = static_cast<double>(r.size());
      const double mr = std::accumulate(r.begin(), r.end(), 0.0) / nn;
      const double me = std::accumulate(est.begin(), est.end(), 0.0) / nn;
      double see = 0, ser = 0, srr = 0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        see += (est[i] - me) * (est[i] - me);
        ser += (est[i] - me) * (r[i] - mr);
        srr += (r[i] - mr) * (r[i] - mr);
      }
      const double gain = see > 0 ? ser / see : 0.0;
      double e2 = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = gain * (est[i] - me) - (r[i] - mr);
        e2 += d * d;
      }
      sig += srr / nn;
      err += e2 / nn;
    }
    out.push_back({scales[si], 10.0 * std::log10(sig / std::max(err, 1e-300))});
  }
  return out;
}

double snr_slope_per_doubling(const std::vector<NoisePoint>& curve, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& p : curve) {
    if (p.scale < lo || p.scale > hi || p.scale <= 0) continue;
    const double x = std::log2(p.scale);
    sx += x;
    sy += p.mean_snr_db;
    sxx += x * x;
    sxy += x * p.mean_snr_db;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("need two noise scales inside the fit range");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string network_to_json(const Network& net, const TrainConfig& cfg, LossKind kind) {
  using nlohmann::json;
  json j;
  j["format"] = "oddm-network";
  j["format_version"] = 1;
  j["loss"] = kind == LossKind::AnalogMse ? "analog_mse" : "digital_preconditioned";
  j["train"] = {{"epochs", cfg.epochs}, {"step", cfg.step},   {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},   {"eps", cfg.eps},     {"batch", cfg.batch},
                {"steepness_growth", cfg.steepness_growth},   {"target_scale", cfg.target_scale},
                {"noise_during_training", cfg.noise_during_training}, {"seed", cfg.seed}};
  json layers = json::array();
  for (const auto& l : net.layers) {
    json jl;
    jl["n_up"] = l.n_up;
    jl["n_down"] = l.n_down;
    jl["star_fanout"] = l.star_fanout;
    jl["variant"] = l.variant == UnitVariant::FixedSplit ? "fixed_split" : "tunable_mzi";
    jl["split_ratio"] = l.split_ratio;
    jl["noise_sigma"] = l.noise_sigma;
    jl["activation"] = l.chain.activation == Activation::Identity ? "identity" : "sigmoid_rail";
    jl["v_pi"] = l.chain.v_pi;
    jl["tia_gain_rad_per_ma"] = l.chain.tia_gain_rad_per_ma;
    jl["gamma_rad"] = l.gamma;
    json cs = json::array();
    for (const auto& c : l.cascades) cs.push_back(c.params());
    jl["angles_rad"] = cs;
    jl["budget"] = {{"ll_r_db", l.budget.ll_r_db},
                    {"ll_mod_db", l.budget.ll_mod_db},
                    {"responsivity_a_per_w", l.budget.responsivity_a_per_w},
                    {"comb_power_w", l.budget.comb_power_w}};
    layers.push_back(jl);
  }
  j["layers"] = layers;
  return j.dump(1);
}

Network network_from_json(const std::string& text) {
  using nlohmann::json;
  const json j = json::parse(text);
  if (j.value("format", "") != "oddm-network") throw std::invalid_argument("not a network document");
  if (j.value("format_version", 0) != 1) throw std::invalid_argument("unsupported format_version");
  Network net;
  for (const auto& jl : j.at("layers")) {
    LayerNet l;
    l.n_up = jl.at("n_up");
    l.n_down = jl.at("n_down");
    l.star_fanout = jl.value("star_fanout", 0);
    l.variant = jl.at("variant") == "fixed_split" ? UnitVariant::FixedSplit : UnitVariant::TunableMzi;
    l.split_ratio = jl.at("split_ratio");
    l.noise_sigma = jl.at("noise_sigma");
    l.chain.activation = jl.at("activation") == "identity" ? Activation::Identity : Activation::SigmoidRail;
    l.chain.v_pi = jl.at("v_pi");
    l.chain.tia_gain_rad_per_ma = jl.at("tia_gain_rad_per_ma");
    l.gamma = jl.at("gamma_rad").get<std::vector<double>>();
    const auto& b = jl.at("budget");
    l.budget.ll_r_db = b.at("ll_r_db");
    l.budget.ll_mod_db = b.at("ll_mod_db");
    l.budget.responsivity_a_per_w = b.at("responsivity_a_per_w");
    l.budget.comb_power_w = b.at("comb_power_w");
    CombGrid grid;
    grid.q_count = 4 * l.n_up - 1;
    for (const auto& a : jl.at("angles_rad")) {
      DemodCascade c = DemodCascade::make(l.n_up, l.variant, grid.tau0(), l.split_ratio);
      c.set_params(a.get<std::vector<double>>());
      l.cascades.push_back(std::move(c));
    }
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

void write_loss_csv(const std::string& path, const TrainResult& r) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "epoch,batch,loss,grad_norm\n";
  f.precision(10);
  for (const auto& h : r.history) f << h.epoch << ',' << h.batch << ',' << h.loss << ',' << h.grad_norm << '\n';
}

}  // namespace oddm
