#include "oddm/devices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace oddm {
namespace {

constexpr double kBesselCoef[6] = {945.0, 945.0, 420.0, 105.0, 15.0, 1.0};  // s^0 .. s^5

cplx bessel_proto(cplx s) {
  cplx p = kBesselCoef[5];
  for (int k = 4; k >= 0; --k) p = p * s + kBesselCoef[k];
  return kBesselCoef[0] / p;
}

double proto_mag2(double x) { return std::norm(bessel_proto(cplx(0.0, x))); }

// normalized frequency where |H|^2 = 1/2
double proto_x3db() {
  static const double x = [] {
    double lo = 0.5, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (proto_mag2(mid) > 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }();
  return x;
}

// integral of |H(jx)|^2 dx over [0, inf) for the unit-cutoff filter
double proto_neb_ratio() {
  static const double r = [] {
    const double x3 = proto_x3db();
    const double top = 60.0;  // in units of cutoff
    const int n = 600000;     // Simpson panels
    const double h = top / n;
    double acc = proto_mag2(0.0) + proto_mag2(top * x3);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * proto_mag2(i * h * x3);
    acc *= h / 3.0;
    // |H|^2 ~ (945 / x^5)^2 beyond the range
    const double xt = top * x3;
    acc += 945.0 * 945.0 / (9.0 * std::pow(xt, 9)) / x3;
    return acc;
  }();
  return r;
}

}  // namespace

void BesselFilterSpec::validate() const {
  if (order != 5) throw std::invalid_argument("Bessel order is fixed at 5");
  if (!(cutoff_hz > 0)) throw std::invalid_argument("cutoff_hz must be > 0");
}

cplx bessel_response(const BesselFilterSpec& spec, double f_hz) {
  return bessel_proto(cplx(0.0, f_hz / spec.cutoff_hz * proto_x3db()));
}

std::vector<cplx> bessel_transfer(const BesselFilterSpec& spec, const std::vector<double>& freqs) {
  spec.validate();
  std::vector<cplx> h(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) h[i] = bessel_response(spec, freqs[i]);
  return h;
}

double noise_equivalent_bandwidth(const BesselFilterSpec& spec) {
  spec.validate();
  return proto_neb_ratio() * spec.cutoff_hz;
}

NoiseSigmas noise_sigmas(double i_cm, double f_neb, double i_n) {
  if (i_cm < 0) throw std::invalid_argument("i_cm must be >= 0");
  return {std::sqrt(2.0 * kQe * i_cm * f_neb), i_n * std::sqrt(f_neb)};
}

double beta2_from_d(double d_ps_nm_km, double wavelength_m) {
  const double d_si = d_ps_nm_km * 1e-6;  // s/m^2
  return -d_si * wavelength_m * wavelength_m / (2.0 * kPi * kC0);
}

double wavelength_of(double freq_hz) { return kC0 / freq_hz; }

std::vector<double> dispersion_phase(double d_ps_nm_km, double length_m, const CombGrid& grid) {
  const double b2 = beta2_from_d(d_ps_nm_km, wavelength_of(grid.center_freq_hz));
  std::vector<double> ph(grid.q_count);
  const double qc = 0.5 * (grid.q_count - 1);
  for (int q = 0; q < grid.q_count; ++q) {
    const double dw = 2.0 * kPi * (q - qc) * grid.fsr_hz;
    ph[q] = 0.5 * b2 * length_m * dw * dw;
  }
  return ph;
}

double dispersion_group_delay(double d_ps_nm_km, double length_m, double wavelength_m,
                              double df_hz) {
  return beta2_from_d(d_ps_nm_km, wavelength_m) * length_m * 2.0 * kPi * df_hz;
}

double SohModulatorModel::efficiency(double lambda_m) const {
  return 1.0 + efficiency_slope * (lambda_m - center_wavelength_m) / slope_span_m;
}

double SohModulatorModel::efficiency_per_hz() const {
  // d(lambda)/d(f) = -lambda^2 / c
  return -efficiency_slope / slope_span_m * center_wavelength_m * center_wavelength_m / kC0;
}

double modulator_phase(const SohModulatorModel& model, double drive_v, double lambda_m) {
  if (std::abs(drive_v) > 2.0 * model.v_pi)
    throw std::invalid_argument("drive exceeds 2 V_pi");
  return kPi * drive_v / model.v_pi * model.efficiency(lambda_m);
}

double modulator_group_delay(const SohModulatorModel& model, double phase_rad) {
  return std::abs(phase_rad * model.efficiency_per_hz()) / (2.0 * kPi);
}

std::vector<LossComponent> default_loss_components() {
  return {{"edge_coupler", 2.0, LossClass::Common},   {"splitter_network", 2.0, LossClass::SignalOnly},
          {"demodulator", 3.0, LossClass::Common},    {"routing", 2.0, LossClass::Common},
          {"star_excess", 5.0, LossClass::Common},    {"modulator", 2.55, LossClass::SignalOnly}};
}

LinkBudget link_budget_assemble(const std::vector<LossComponent>& components,
                                const LinkBudget& base) {
  LinkBudget b = base;
  b.ll_r_db = 0.0;
  b.ll_mod_db = 0.0;
  for (const auto& c : components) {
    if (c.db < 0) throw std::invalid_argument("negative loss for component " + c.name);
    (c.cls == LossClass::Common ? b.ll_r_db : b.ll_mod_db) += c.db;
  }
  return b;
}

double phase_noise_std(double lw_hz, double tau_delta) {
  if (lw_hz < 0 || tau_delta < 0) throw std::invalid_argument("negative linewidth or delay");
  return std::sqrt(2.0 * kPi * lw_hz * tau_delta);
}

double rf_jitter_std(double lw_rf_hz, double tau_delta, double fsr_hz) {
  return phase_noise_std(lw_rf_hz, tau_delta) / (2.0 * kPi * fsr_hz);
}

double Table1D::at(double lambda_nm) const {
  if (wavelength_nm.empty()) throw invalid_state("empty table " + quantity);
  if (lambda_nm <= wavelength_nm.front()) return value.front();
  if (lambda_nm >= wavelength_nm.back()) return value.back();
  auto it = std::upper_bound(wavelength_nm.begin(), wavelength_nm.end(), lambda_nm);
  const std::size_t i = static_cast<std::size_t>(it - wavelength_nm.begin());
  const double x0 = wavelength_nm[i - 1], x1 = wavelength_nm[i];
  const double t = (lambda_nm - x0) / (x1 - x0);
  return value[i - 1] + t * (value[i] - value[i - 1]);
}

Table1D load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open table " + path);
  Table1D t;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto kv = line.substr(1);
      auto colon = kv.find(':');
      if (colon == std::string::npos) continue;
      auto key = kv.substr(0, colon);
      auto val = kv.substr(colon + 1);
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t\r") + 1);
        return s;
      };
      key = trim(key);
      if (key == "quantity") t.quantity = trim(val);
      if (key == "unit") t.unit = trim(val);
      continue;
    }
    for (auto& ch : line)
      if (ch == ',' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    if (!header_seen) {
      std::string a, b;
      ss >> a >> b;
      if (a != "wavelength_nm")
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected header 'wavelength_nm value'");
      header_seen = true;
      continue;
    }
    double x, y;
    if (!(ss >> x >> y))
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed row");
    if (!t.wavelength_nm.empty() && x <= t.wavelength_nm.back())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": wavelengths must increase");
    t.wavelength_nm.push_back(x);
    t.value.push_back(y);
  }
  if (t.wavelength_nm.empty()) throw std::invalid_argument("table has no rows: " + path);
  return t;
}

void save_table(const Table1D& t, const std::string& path) {
  std::ofstream out(path);
  out << "# quantity: " << t.quantity << "\n# unit: " << t.unit << "\nwavelength_nm\tvalue\n";
  char buf[64];
  for (std::size_t i = 0; i < t.wavelength_nm.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.1f\t%.4f\n", t.wavelength_nm[i], t.value[i]);
    out << buf;
  }
}

std::string resolve_data_path(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::path(name).is_absolute() || fs::exists(name)) return name;
  if (const char* env = std::getenv("ODDM_DATA_DIR")) {
    fs::path p = fs::path(env) / name;
    if (fs::exists(p)) return p.string();
  }
  fs::path p = fs::path(ODDM_SOURCE_DATA_DIR) / name;
  if (fs::exists(p)) return p.string();
  throw std::invalid_argument("data file not found: " + name);
}

DcsModel DcsModel::defaults() {
  DcsModel m;
  m.coupling_vs_lambda.quantity = "dcs_power_cross_coupling";
  m.coupling_vs_lambda.unit = "1";
  m.gd_imbalance_vs_lambda.quantity = "dcs_bar_path_group_delay_imbalance";
  m.gd_imbalance_vs_lambda.unit = "fs";
  for (int nm = 1500; nm <= 1650; nm += 10) {
    const double kappa = 0.49 + 0.025 * std::tanh((nm - 1560.0) / 50.0);
    const double gd = (nm - 1550.0) / 90.0;
    m.coupling_vs_lambda.wavelength_nm.push_back(nm);
    m.coupling_vs_lambda.value.push_back(std::round(kappa * 1e4) / 1e4);
    m.gd_imbalance_vs_lambda.wavelength_nm.push_back(nm);
    m.gd_imbalance_vs_lambda.value.push_back(std::round(gd * 1e4) / 1e4);
  }
  return m;
}

DcsModel DcsModel::load(const std::string& coupling_path, const std::string& gd_path) {
  DcsModel m;
  m.coupling_vs_lambda = load_table(resolve_data_path(coupling_path));
  m.gd_imbalance_vs_lambda = load_table(resolve_data_path(gd_path));
  return m;
}

double DcsModel::cascade_gd_error(double lambda_m, int n_devices) const {
  return n_devices * gd_imbalance_vs_lambda.at(lambda_m * 1e9) * 1e-15;
}

StarCouplerModel StarCouplerModel::make_default(int n_ports, std::uint64_t seed,
                                                double gd_span_fs) {
  if (n_ports < 1) throw std::invalid_argument("n_ports must be >= 1");
  StarCouplerModel s;
  s.n_ports = n_ports;
  const std::size_t nn = static_cast<std::size_t>(n_ports) * n_ports;
  s.excess_loss_db.assign(nn, 0.0);
  s.gd_offset_fs.assign(nn, 0.0);
  s.gamma.assign(nn, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  std::vector<double> a(n_ports), b(n_ports);
  for (auto& x : a) x = uni(rng);
  for (auto& x : b) x = uni(rng);
  const double half = 0.5 * (n_ports - 1);
  for (int o = 0; o < n_ports; ++o)
    for (int i = 0; i < n_ports; ++i) {
      const std::size_t k = static_cast<std::size_t>(o) * n_ports + i;
      const long prod = (static_cast<long>(o) * i) % n_ports;
      s.gamma[k] = a[o] + b[i] + 2.0 * kPi * prod / n_ports;
      const double uo = half > 0 ? (o - half) / half : 0.0;
      const double ui = half > 0 ? (i - half) / half : 0.0;
      s.gd_offset_fs[k] = 0.5 * gd_span_fs * (uo + ui);
    }
  return s;
}

cplx StarCouplerModel::transfer(int out, int in, double df_hz, bool with_gd) const {
  const std::size_t k = static_cast<std::size_t>(out) * n_ports + in;
  const double amp = std::pow(10.0, -excess_loss_db[k] / 20.0) / std::sqrt(double(n_ports));
  double ph = gamma[k];
  if (with_gd) ph -= 2.0 * kPi * df_hz * gd_offset_fs[k] * 1e-15;
  return std::polar(amp, ph);
}

void NoiseSpec::validate() const {
  if (i_n_a_sqrt_hz < 0 || lw_opt_hz < 0 || lw_rf_hz < 0 || ase_psd_w_hz < 0)
    throw std::invalid_argument("noise parameters must be nonnegative");
  if (!(responsivity > 0)) throw std::invalid_argument("responsivity must be > 0");
}

}  // namespace oddm
