#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "oddm/ann.hpp"

using namespace oddm;

namespace {

Network make_net(std::initializer_list<std::pair<int, int>> shapes, std::uint64_t seed,
                 UnitVariant v = UnitVariant::TunableMzi, double noise = 0.0) {
  Network n;
  int i = 0;
  for (auto [up, down] : shapes) {
    const bool last = ++i == static_cast<int>(shapes.size());
    n.layers.push_back(LayerNet::make(up, down, derive_seed(seed, i), noise,
                                      last ? Activation::Identity : Activation::SigmoidRail, v));
  }
  return n;
}

std::vector<std::vector<double>> random_inputs(int batch, int n, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<std::vector<double>> x(batch, std::vector<double>(n));
  for (auto& r : x)
    for (auto& v : r) v = u(g);
  return x;
}

double weighted_sum(const Network& net, const std::vector<std::vector<double>>& x,
                    const std::vector<std::vector<double>>& c) {
  const auto fc = forward(net, x, false, 0);
  double s = 0;
  for (std::size_t b = 0; b < x.size(); ++b) {
    const auto o = fc.output(b);
    for (std::size_t p = 0; p < o.size(); ++p) s += c[b][p] * o[p];
  }
  return s;
}

// max over checked parameters of |g - fd| / max(|fd|, 1e-3 * max|fd|)
double grad_check(Network net, std::mt19937_64& g, int max_params) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  std::normal_distribution<double> n01;
  auto p = net.params();
  for (auto& v : p) v = u(g);
  net.set_params(p);
  const auto x = random_inputs(3, net.n_inputs(), g);
  std::vector<std::vector<double>> c(3, std::vector<double>(net.n_outputs()));
  for (auto& r : c)
    for (auto& v : r) v = n01(g);
  const auto fc = forward(net, x, false, 0);
  const auto ga = backward(net, fc, c);
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), g);
  if (static_cast<int>(idx.size()) > max_params) idx.resize(max_params);
  const double h = 1e-6;
  std::vector<double> fd(idx.size()), an(idx.size());
  double scale = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto pp = p, pm = p;
    pp[idx[k]] += h;
    pm[idx[k]] -= h;
    Network a = net, b = net;
    a.set_params(pp);
    b.set_params(pm);
    fd[k] = (weighted_sum(a, x, c) - weighted_sum(b, x, c)) / (2 * h);
    an[k] = ga[idx[k]];
    scale = std::max(scale, std::abs(fd[k]));
  }
  double worst = 0;
  for (std::size_t k = 0; k < idx.size(); ++k)
    worst = std::max(worst, std::abs(an[k] - fd[k]) / std::max(std::abs(fd[k]), 1e-3 * scale));
  return worst;
}

}  // namespace

TEST_CASE("neuron chain") {
  NeuronChain c;
  CHECK(c.activate(0.0) == c.bias_point());
  CHECK(c.bias_point() == 1.0);
  CHECK(c.derivative(0.0) * kPi / c.v_pi == doctest::Approx(1e4).epsilon(1e-12));
  double prev = -1;
  for (double i = -2e-3; i <= 2e-3; i += 1e-6) {
    const double v = c.activate(i);
    CHECK(v >= 0.0);
    CHECK(v <= c.v_pi);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(c.activate(1.0) <= c.v_pi);
  CHECK(c.activate(-1.0) >= 0.0);
}

TEST_CASE("nominal link noise scaling") {
  CHECK(nominal_link_noise(31) == doctest::Approx(0.061));
  CHECK(nominal_link_noise(11) == doctest::Approx(0.061 / std::sqrt(31.0 / 11.0)));
  CHECK(nominal_link_noise(11) == doctest::Approx(0.0364).epsilon(1e-3));
}

TEST_CASE("forward: bias point, weight consistency, determinism, noise statistics") {
  // bar cascades: only channel 0 carries weight; gamma cancels its phase
  Network net = make_net({{4, 3}}, 1);
  net.layers[0].chain.activation = Activation::SigmoidRail;
  for (auto& c : net.layers[0].cascades)
    for (auto& u : c.units) {
      u.theta_a = 0;
      u.theta_b = kPi;
    }
  for (int p = 0; p < 3; ++p) {
    const double eta = std::arg(cascade_coefficients(net.layers[0].cascades[p])[0]);
    for (int m = 0; m < 4; ++m) net.layers[0].gamma[p * 4 + m] = eta;
  }
  std::vector<std::vector<double>> zero = {{0.0, 0.7, 1.3, 0.2}};
  const auto fz = forward(net, zero, false, 0);
  for (double y : fz.y[0]) CHECK(y == doctest::Approx(1.0).epsilon(1e-14));

  // single weight, phase swept: output is monotone on (-pi/2, pi/2)
  double prev = -1;
  for (double phi = -kPi / 2 + 0.01; phi < kPi / 2; phi += 0.01) {
    const auto f = forward(net, {{phi * 2.0 / kPi, 0, 0, 0}}, false, 0);
    CHECK(f.y[0][0] > prev);
    prev = f.y[0][0];
  }

  // cascade coefficients vs IDFT-extracted weights
  std::mt19937_64 g(2);
  Network r = make_net({{5, 4}}, 3);
  const auto x = random_inputs(10, 5, g);
  const auto fr = forward(r, x, false, 0);
  CombGrid grid;
  grid.q_count = 19;
  const auto& l = r.layers[0];
  double worst = 0;
  for (std::size_t s = 0; s < x.size(); ++s)
    for (int p = 0; p < 4; ++p) {
      const auto w = weights_from_settings(l.cascades[p], grid);
      double u = 0;
      for (int m = 0; m < 5; ++m)
        u += std::abs(w.v[m]) * std::sin(kPi * x[s][m] / 2.0 + l.gamma[p * 5 + m] - std::arg(w.v[m]));
      worst = std::max(worst, std::abs(u - fr.u[0][s * 4 + p]));
    }
  CHECK(worst < 1e-10);

  Network noisy = make_net({{5, 10}}, 4, UnitVariant::FixedSplit, 0.05);
  const auto a = forward(noisy, x, true, 9), b = forward(noisy, x, true, 9);
  CHECK(a.u == b.u);
  CHECK(forward(noisy, x, true, 10).u != a.u);

  std::vector<std::vector<double>> big(100000, std::vector<double>(5, 1.0));
  const auto on = forward(noisy, big, true, 5), off = forward(noisy, big, false, 5);
  double s2 = 0;
  for (std::size_t i = 0; i < on.u[0].size(); ++i) s2 += std::pow(on.u[0][i] - off.u[0][i], 2);
  CHECK(std::sqrt(s2 / on.u[0].size()) == doctest::Approx(0.05).epsilon(0.02));
  const auto half = forward(noisy, big, true, 5, 0.5);
  CHECK(half.u[0][7] - off.u[0][7] == doctest::Approx(0.5 * (on.u[0][7] - off.u[0][7])));

  CHECK_THROWS_AS(forward(noisy, {{1.0, 2.0}}, false, 0), std::invalid_argument);
}

TEST_CASE("backward: finite differences, zero gradients, stale cache") {
  std::mt19937_64 g(17);
  double worst = 0;
  for (int t = 0; t < 10; ++t) {
    worst = std::max(worst, grad_check(make_net({{2, 2}, {2, 2}}, t), g, 1000));
    worst = std::max(worst, grad_check(make_net({{5, 3}}, t, UnitVariant::FixedSplit), g, 1000));
    worst = std::max(worst, grad_check(make_net({{11, 31}, {31, 1}}, t, UnitVariant::FixedSplit), g, 15));
  }
  CHECK(worst < 1e-5);

  Network net = make_net({{3, 2}}, 1);
  const auto x = random_inputs(4, 3, g);
  const auto fc = forward(net, x, false, 0);
  const auto z = backward(net, fc, std::vector<std::vector<double>>(4, std::vector<double>(2, 0.0)));
  for (double v : z) CHECK(v == 0.0);

  // a unit in bar state that passes no light to the delay line: its bar-path phase is irrelevant
  Network bar = make_net({{3, 1}}, 2);
  for (auto& u : bar.layers[0].cascades[0].units) {
    u.theta_a = 0;
    u.theta_b = kPi;
  }
  bar.layers[0].cascades[0].units[2].theta_a = 0.4;
  bar.set_params(bar.params());
  const auto fb = forward(bar, x, false, 0);
  const auto gb = backward(bar, fb, std::vector<std::vector<double>>(4, {1.0}));
  // parameters of unit 2: the last unit's upper-arm input never carries light here
  CHECK(std::abs(gb[4]) < 1e-12);

  auto p = net.params();
  p[0] += 0.1;
  net.set_params(p);
  CHECK_THROWS_AS(backward(net, fc, std::vector<std::vector<double>>(4, std::vector<double>(2, 1.0))),
                  invalid_state);
}

TEST_CASE("training: identity task, determinism, divergence guard, config checks") {
  Network net;
  net.layers.push_back(LayerNet::make(1, 1, 5, 0.0, Activation::Identity, UnitVariant::TunableMzi));
  Dataset d;
  for (int i = 0; i < 64; ++i) {
    const double v = 2.0 * i / 63.0;
    d.inputs.push_back({v});
    d.targets.push_back({0.5 * std::sin(kPi * v / 2.0 + 0.3)});
  }
  TrainConfig cfg;
  cfg.noise_during_training = false;
  cfg.step = 0.1;
  Network a = net;
  const auto r = train(a, d, cfg, LossKind::AnalogMse);
  CHECK(r.epoch_loss.size() == 60);
  CHECK(r.epoch_loss.back() < 1e-4);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  Network b = net;
  train(b, d, cfg, LossKind::AnalogMse);
  CHECK(a.params() == b.params());
  CHECK(evaluate_loss(a, d, LossKind::AnalogMse, 1.0, 1.0, false, 0) < 1e-4);

  Network sig = make_net({{1, 1}}, 1);
  sig.layers[0].chain.activation = Activation::SigmoidRail;
  CHECK_THROWS_AS(train(sig, d, cfg, LossKind::AnalogMse), std::invalid_argument);

  Dataset bad = d;
  bad.targets[3][0] = std::nan("");
  Network c = net;
  CHECK_THROWS_AS(train(c, bad, cfg, LossKind::AnalogMse), training_diverged);

  TrainConfig e = cfg;
  e.epochs = 0;
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e = cfg;
  e.epochs = 3;
  e.steepness_schedule = {1, 0.5, 2};
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e.steepness_schedule = {1, 1.5, 2};
  CHECK(e.steepness(2, net.layers[0]) == 2.0);
  TrainConfig geo;
  CHECK(geo.steepness(3, net.layers[0]) / geo.steepness(2, net.layers[0]) == doctest::Approx(1.1));

  Dataset empty;
  CHECK_THROWS_AS(train(c, empty, cfg, LossKind::AnalogMse), std::invalid_argument);
}

TEST_CASE("digital preconditioned loss trains thresholds") {
  Network net = make_net({{1, 3}}, 8);
  Dataset d;
  for (int i = 0; i < 96; ++i) {
    const double v = 2.0 * i / 95.0;
    const double s = std::sin(kPi * v / 2.0 - kPi / 2);
    d.inputs.push_back({v});
    d.targets.push_back({s > -0.5 ? 1.0 : 0.0, s > 0.0 ? 1.0 : 0.0, s > 0.5 ? 1.0 : 0.0});
  }
  TrainConfig cfg;
  cfg.noise_during_training = false;
  cfg.steepness_schedule.assign(60, 20.0);
  const double before = evaluate_loss(net, d, LossKind::DigitalPreconditioned, 20.0, 1.0, false, 0);
  train(net, d, cfg, LossKind::DigitalPreconditioned);
  CHECK(evaluate_loss(net, d, LossKind::DigitalPreconditioned, 20.0, 1.0, false, 0) < 0.5 * before);
}

TEST_CASE("noise robustness curve and slope fit") {
  Network net = make_net({{2, 1}}, 3, UnitVariant::TunableMzi, 0.05);
  std::mt19937_64 g(4);
  std::vector<std::vector<std::vector<double>>> groups = {random_inputs(400, 2, g), random_inputs(400, 2, g)};
  std::vector<std::vector<double>> ref;
  for (const auto& gr : groups) {
    const auto f = forward(net, gr, false, 0);
    std::vector<double> r;
    for (std::size_t s = 0; s < f.batch; ++s) r.push_back(f.output(s)[0]);
    ref.push_back(r);
  }
  const Readout ro = [](const std::vector<double>& o) { return o[0]; };
  const auto c = noise_robustness_curve(net, groups, ref, {0.0, 0.125, 0.25, 0.5, 1.0}, ro, 1);
  CHECK(c[0].mean_snr_db > 150);
  // additive noise well below the signal on a linear readout: 6.02 dB per doubling
  CHECK(snr_slope_per_doubling(c, 0.125, 1.0) == doctest::Approx(-6.02).epsilon(0.05));
  CHECK_THROWS_AS(snr_slope_per_doubling(c, 0.25, 0.3), std::invalid_argument);
}

TEST_CASE("network serialization") {
  Network net = make_net({{3, 4}, {4, 2}}, 6, UnitVariant::FixedSplit, 0.02);
  net.layers[1].star_fanout = 4;
  TrainConfig cfg;
  const auto text = network_to_json(net, cfg, LossKind::AnalogMse);
  const auto back = network_from_json(text);
  CHECK(back.params() == net.params());
  CHECK(back.layers[1].star_fanout == 4);
  std::mt19937_64 g(1);
  const auto x = random_inputs(5, 3, g);
  CHECK(forward(back, x, true, 3).u == forward(net, x, true, 3).u);
  CHECK_THROWS_AS(network_from_json(R"({"format":"other"})"), std::invalid_argument);

  const auto p = std::filesystem::temp_directory_path() / "oddm_loss.csv";
  TrainResult r;
  r.history.push_back({0, 0, 1.5, 0.25});
  write_loss_csv(p.string(), r);
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,batch,loss,grad_norm");
  std::getline(f, line);
  CHECK(line == "0,0,1.5,0.25");
}
