#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <random>

#include "oddm/devices.hpp"

using namespace oddm;

TEST_CASE("Bessel lowpass") {
  const BesselFilterSpec s{5, 12.5e9};
  CHECK(std::abs(bessel_response(s, 0.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::norm(bessel_response(s, 12.5e9)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(20 * std::log10(std::abs(bessel_response(s, 25e9))) <= -14.0);
  CHECK_THROWS_AS(bessel_transfer(BesselFilterSpec{4, 1e9}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(bessel_transfer(BesselFilterSpec{5, 0.0}, {0.0}), std::invalid_argument);
  // monotone magnitude roll-off
  double prev = 1.0;
  for (double f = 1e8; f < 1e11; f *= 1.2) {
    const double m = std::abs(bessel_response(s, f));
    CHECK(m <= prev + 1e-15);
    prev = m;
  }
}

TEST_CASE("Bessel group delay is flat well below cutoff") {
  const BesselFilterSpec s{5, 10e9};
  auto gd = [&](double f) {
    const double h = 1e3;
    return -(std::arg(bessel_response(s, f + h)) - std::arg(bessel_response(s, f - h))) / (4 * kPi * h);
  };
  const double g0 = gd(1e6);
  for (double f = 0.1e9; f < 3e9; f += 0.1e9) CHECK(std::abs(gd(f) - g0) / g0 < 0.01);
}

TEST_CASE("noise-equivalent bandwidth by independent quadrature") {
  const BesselFilterSpec s{5, 12.5e9};
  // Simpson over [0, 40 f_c] plus a 1/f^10 tail
  const int n = 400000;
  const double fmax = 40 * s.cutoff_hz, h = fmax / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::norm(bessel_response(s, i * h));
  }
  acc *= h / 3;
  acc += std::norm(bessel_response(s, fmax)) * fmax / 9.0;
  const double neb = noise_equivalent_bandwidth(s);
  CHECK(neb == doctest::Approx(acc).epsilon(1e-3));
  CHECK(neb == doctest::Approx(12.8e9).epsilon(0.02));
  CHECK(neb >= s.cutoff_hz);
  CHECK(noise_equivalent_bandwidth({5, 25e9}) == doctest::Approx(2 * neb).epsilon(1e-3));
}

TEST_CASE("noise sigmas") {
  const double neb = noise_equivalent_bandwidth({5, 12.5e9});
  const auto s = noise_sigmas(532.7e-6, 12.77e9, 10e-12);
  CHECK(s.shot == doctest::Approx(1.47e-6).epsilon(0.01));
  CHECK(s.thermal == doctest::Approx(1.13e-6).epsilon(0.01));
  CHECK(noise_sigmas(0.0, neb, 10e-12).shot == 0.0);
  CHECK(noise_sigmas(4.0, neb, 0).shot == doctest::Approx(2 * noise_sigmas(1.0, neb, 0).shot));
  CHECK_THROWS_AS(noise_sigmas(-1.0, neb, 0), std::invalid_argument);
}

TEST_CASE("waveguide dispersion") {
  CombGrid g;
  for (double p : dispersion_phase(0.0, 1e-3, g)) CHECK(p == 0.0);
  const double lam = 1.55e-6, dlam = 75e-9;
  const double df = kC0 * dlam / (lam * lam);
  const double spread = std::abs(dispersion_group_delay(660, 11.1e-6, lam, df));
  CHECK(spread / 2 == doctest::Approx(0.3e-15).epsilon(0.15));
  CHECK(spread == doctest::Approx(660e-6 * 11.1e-6 * dlam).epsilon(0.01));
  CHECK(std::abs(dispersion_group_delay(660, 22.2e-6, lam, df)) == doctest::Approx(2 * spread));
  // phase curvature matches the group delay
  const auto ph = dispersion_phase(660, 1e-3, g);
  const int q = 80;
  const double gd = (ph[q + 1] - ph[q - 1]) / (2 * 2 * kPi * g.fsr_hz);
  const double off = (q - 61) * g.fsr_hz;
  CHECK(gd == doctest::Approx(dispersion_group_delay(660, 1e-3, wavelength_of(g.center_freq_hz), off)).epsilon(1e-6));
}

TEST_CASE("SOH modulator") {
  SohModulatorModel m;
  CHECK(modulator_phase(m, m.v_pi, m.center_wavelength_m) == doctest::Approx(kPi));
  CHECK(modulator_phase(m, 0.0, 1.6e-6) == 0.0);
  CHECK(m.efficiency(m.center_wavelength_m + 37.5e-9) - m.efficiency(m.center_wavelength_m - 37.5e-9) ==
        doctest::Approx(0.042));
  CHECK(modulator_group_delay(m, kPi) == doctest::Approx(2.3e-15).epsilon(0.05));
  CHECK_THROWS_AS(modulator_phase(m, 5 * m.v_pi, 1.55e-6), std::invalid_argument);
}

TEST_CASE("link budget assembly") {
  const auto b = link_budget_assemble(default_loss_components(), LinkBudget{});
  CHECK(b.ll_r_db == doctest::Approx(12.0));
  CHECK(b.ll_mod_db == doctest::Approx(4.55));
  const auto e = link_budget_assemble({}, LinkBudget{});
  CHECK(e.ll_r_db == 0.0);
  CHECK(e.ll_mod_db == 0.0);
  auto extra = default_loss_components();
  extra.push_back({"extra", 3.0, LossClass::Common});
  const auto b3 = link_budget_assemble(extra, LinkBudget{});
  CHECK(std::pow(10.0, -(b3.ll_r_db - b.ll_r_db) / 10) == doctest::Approx(0.501).epsilon(1e-3));
  CHECK_THROWS_AS(link_budget_assemble({{"bad", -1.0, LossClass::Common}}, LinkBudget{}),
                  std::invalid_argument);
}

TEST_CASE("phase noise and RF jitter") {
  CHECK(phase_noise_std(1e6, 19.9e-12) == doctest::Approx(0.0112).epsilon(0.01));
  CHECK(phase_noise_std(1e6, 19.9e-12) * 180 / kPi == doctest::Approx(0.64).epsilon(0.01));
  CHECK(phase_noise_std(0.0, 1e-9) == 0.0);
  CHECK(rf_jitter_std(1e3, 19.9e-12, 50e9) == doctest::Approx(1.1e-15).epsilon(0.05));
}

TEST_CASE("DCS tables") {
  const auto m = DcsModel::defaults();
  for (double nm = 1500; nm <= 1620; nm += 0.5) {
    const double k = m.coupling_vs_lambda.at(nm);
    CHECK(k >= 0.46);
    CHECK(k <= 0.52);
  }
  for (double nm = 1510; nm <= 1640; nm += 0.5) CHECK(std::abs(m.gd_imbalance_vs_lambda.at(nm)) <= 1.0);
  CHECK(m.cascade_gd_error(1.6e-6, 62) == doctest::Approx(62 * m.gd_imbalance_vs_lambda.at(1600) * 1e-15));

  const auto dir = std::filesystem::temp_directory_path() / "oddm_test_tables";
  std::filesystem::create_directories(dir);
  save_table(m.coupling_vs_lambda, (dir / "k.tsv").string());
  const auto t = load_table((dir / "k.tsv").string());
  CHECK(t.quantity == m.coupling_vs_lambda.quantity);
  CHECK(t.value == m.coupling_vs_lambda.value);
  CHECK_THROWS(load_table((dir / "missing.tsv").string()));

  // shipped tables resolve through the data directory
  const auto shipped = DcsModel::load("dcs_coupling.tsv", "dcs_gd_imbalance.tsv");
  CHECK(shipped.coupling_vs_lambda.value == m.coupling_vs_lambda.value);
  setenv("ODDM_DATA_DIR", dir.string().c_str(), 1);
  CHECK(resolve_data_path("k.tsv") == (dir / "k.tsv").string());
  unsetenv("ODDM_DATA_DIR");
}

TEST_CASE("star coupler is passive with bounded delay offsets") {
  const auto s = StarCouplerModel::make_default(32, 4);
  double worst = 0;
  for (double g : s.gd_offset_fs) worst = std::max(worst, std::abs(g));
  CHECK(worst <= 20.0 + 1e-12);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  for (int t = 0; t < 1000; ++t) {
    std::vector<cplx> in(32);
    double pin = 0;
    for (auto& x : in) {
      x = {d(rng), d(rng)};
      pin += std::norm(x);
    }
    const double df = 1e12 * d(rng);
    double pout = 0;
    for (int o = 0; o < 32; ++o) {
      cplx acc = 0;
      for (int i = 0; i < 32; ++i) acc += s.transfer(o, i, df, true) * in[i];
      pout += std::norm(acc);
    }
    CHECK(pout <= pin * (1 + 1e-9));
  }
}
