#include "oddm/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace oddm {
namespace {

using nlohmann::json;

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::None: return "dimensionless";
    case Dim::Time: return "time";
    case Dim::Frequency: return "frequency";
    case Dim::Power: return "power";
    case Dim::Length: return "length";
    case Dim::CurrentDensity: return "current noise density";
    case Dim::Dispersion: return "dispersion";
  }
  return "?";
}

const std::map<std::string, std::pair<Dim, double>>& unit_table() {
  static const std::map<std::string, std::pair<Dim, double>> t = {
      {"s", {Dim::Time, 1.0}},           {"ms", {Dim::Time, 1e-3}},
      {"us", {Dim::Time, 1e-6}},         {"µs", {Dim::Time, 1e-6}},
      {"ns", {Dim::Time, 1e-9}},         {"ps", {Dim::Time, 1e-12}},
      {"fs", {Dim::Time, 1e-15}},        {"Hz", {Dim::Frequency, 1.0}},
      {"kHz", {Dim::Frequency, 1e3}},    {"MHz", {Dim::Frequency, 1e6}},
      {"GHz", {Dim::Frequency, 1e9}},    {"THz", {Dim::Frequency, 1e12}},
      {"W", {Dim::Power, 1.0}},          {"mW", {Dim::Power, 1e-3}},
      {"uW", {Dim::Power, 1e-6}},        {"µW", {Dim::Power, 1e-6}},
      {"m", {Dim::Length, 1.0}},         {"mm", {Dim::Length, 1e-3}},
      {"um", {Dim::Length, 1e-6}},       {"µm", {Dim::Length, 1e-6}},
      {"nm", {Dim::Length, 1e-9}},       {"A/sqrt(Hz)", {Dim::CurrentDensity, 1.0}},
      {"pA/sqrt(Hz)", {Dim::CurrentDensity, 1e-12}}, {"pA/√Hz", {Dim::CurrentDensity, 1e-12}},
      {"ps/nm/km", {Dim::Dispersion, 1.0}}, {"ps/(nm km)", {Dim::Dispersion, 1.0}},
  };
  return t;
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

// Reader over one JSON object that remembers which keys were consumed.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw config_error(path_, "expected an object");
  }
  bool has(const std::string& k) const { return j_ && j_->contains(k); }
  const json& raw(const std::string& k) {
    used_.insert(k);
    return j_->at(k);
  }
  std::string field(const std::string& k) const { return join(path_, k); }

  void quantity(const std::string& k, Dim d, double& out) {
    if (has(k)) out = parse_quantity(raw(k), d, field(k));
  }
  void integer(const std::string& k, int& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    if (!v.is_number_integer()) throw config_error(field(k), "expected an integer");
    out = v.get<int>();
  }
  void uinteger(const std::string& k, std::uint64_t& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw config_error(field(k), "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void boolean(const std::string& k, bool& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    if (!v.is_boolean()) throw config_error(field(k), "expected true or false");
    out = v.get<bool>();
  }
  void quantities(const std::string& k, Dim d, std::vector<double>& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    if (!v.is_array()) throw config_error(field(k), "expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(parse_quantity(v[i], d, field(k) + "[" + std::to_string(i) + "]"));
  }
  std::string str(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_string()) throw config_error(field(k), "expected a string");
    return v.get<std::string>();
  }
  Section sub(const std::string& k) {
    if (!has(k)) return Section(nullptr, field(k));
    return Section(&raw(k), field(k));
  }
  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key())) throw config_error(field(it.key()), "unknown field");
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_toggles(Section s, Toggles& t) {
  s.boolean("opt_lw", t.opt_lw);
  s.boolean("rf_lw", t.rf_lw);
  s.boolean("rin", t.rin);
  s.boolean("ase", t.ase);
  s.boolean("shot", t.shot);
  s.boolean("thermal", t.thermal);
  s.boolean("gd_mismatch", t.gd_mismatch);
  s.boolean("dcs_dispersion", t.dcs_dispersion);
  s.boolean("star_phases", t.star_phases);
  s.boolean("modulator_slope", t.modulator_slope);
  s.boolean("wg_dispersion", t.wg_dispersion);
  s.finish();
}

void read_sweep(Section s, SweepSpec& sw, Dim d) {
  s.quantities("points", d, sw.points);
  s.quantity("cutoff", Dim::Frequency, sw.cutoff_hz);
  s.quantity("fwhm_rel", Dim::None, sw.fwhm_rel);
  s.finish();
  if (sw.points.empty()) throw config_error(s.field("points"), "needs at least one point");
}

void read_train(Section s, TrainConfig& t) {
  s.integer("epochs", t.epochs);
  s.quantity("step", Dim::None, t.step);
  s.quantity("beta1", Dim::None, t.beta1);
  s.quantity("beta2", Dim::None, t.beta2);
  s.quantity("eps", Dim::None, t.eps);
  s.integer("batch", t.batch);
  s.quantities("steepness_schedule", Dim::None, t.steepness_schedule);
  s.quantity("steepness_growth", Dim::None, t.steepness_growth);
  s.quantity("target_scale", Dim::None, t.target_scale);
  s.boolean("noise_during_training", t.noise_during_training);
  s.uinteger("seed", t.seed);
  s.finish();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(s.field(""), e.what());
  }
}

void read_equalizer(Section s, EqualizerConfig& e) {
  s.integer("hidden", e.hidden);
  s.quantity("noise_scale", Dim::None, e.noise_scale);
  s.uinteger("init_seed", e.init_seed);
  read_train(s.sub("train"), e.train);
  s.finish();
}

json toggles_json(const Toggles& t) {
  return {{"opt_lw", t.opt_lw},           {"rf_lw", t.rf_lw},
          {"rin", t.rin},                 {"ase", t.ase},
          {"shot", t.shot},               {"thermal", t.thermal},
          {"gd_mismatch", t.gd_mismatch}, {"dcs_dispersion", t.dcs_dispersion},
          {"star_phases", t.star_phases}, {"modulator_slope", t.modulator_slope},
          {"wg_dispersion", t.wg_dispersion}};
}

json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"step", t.step},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"batch", t.batch},
          {"steepness_schedule", t.steepness_schedule},
          {"steepness_growth", t.steepness_growth},
          {"target_scale", t.target_scale},
          {"noise_during_training", t.noise_during_training},
          {"seed", t.seed}};
}

json sweep_json(const SweepSpec& s) {
  return {{"points", s.points}, {"cutoff", s.cutoff_hz}, {"fwhm_rel", s.fwhm_rel}};
}

void wrap_invalid(const std::string& field, const std::function<void()>& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw config_error(field, e.what());
  }
}

}  // namespace

double parse_quantity(const json& v, Dim dim, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw config_error(field, "expected a number or a \"<value> <unit>\" string");
  const std::string s = v.get<std::string>();
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw config_error(field, "cannot parse quantity '" + s + "'");
  }
  std::string unit = s.substr(pos);
  const auto b = unit.find_first_not_of(' ');
  unit = b == std::string::npos ? "" : unit.substr(b);
  if (unit.empty()) return x;
  if (dim == Dim::None) throw config_error(field, "expected a dimensionless value, got unit '" + unit + "'");
  const auto it = unit_table().find(unit);
  if (it == unit_table().end()) throw config_error(field, "unknown unit '" + unit + "'");
  if (it->second.first != dim)
    throw config_error(field, "unit '" + unit + "' is not a " + std::string(dim_name(dim)) + " unit");
  return x * it->second.second;
}

RunConfig default_config() {
  RunConfig c;
  c.setup = LinkSetup::defaults(31);
  c.fwhm.points = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  c.cutoff.points = {5e9, 6.25e9, 7.5e9, 10e9, 12.5e9, 15e9};
  c.lw_opt.points = {0.0, 1e5, 1e6, 3e6, 1e7, 3e7};
  c.lw_rf.points = {0.0, 1e2, 1e3, 3e3, 1e4, 1e5};
  c.power.points = {0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  c.power.cutoff_hz = 12.5e9;
  c.gd.points = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 120, 140, 163};
  c.equalizer.analog.kind = EqualizerKind::Analog;
  c.equalizer.analog.train.target_scale = 0.25;
  c.equalizer.analog.train.noise_during_training = false;
  c.equalizer.analog.train.epochs = 200;
  c.equalizer.analog_noisy.kind = EqualizerKind::Analog;
  c.equalizer.analog_noisy.train.target_scale = 1.0;
  c.equalizer.analog_noisy.train.noise_during_training = true;
  c.equalizer.analog_noisy.train.epochs = 200;
  c.equalizer.digital.kind = EqualizerKind::Digital;
  c.equalizer.digital.train.noise_during_training = true;
  c.normalized = normalize(c);
  return c;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    // report line and column of the offending byte
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw config_error("", "parse error at line " + std::to_string(line) + ", column " +
                               std::to_string(col) + ": " + e.what());
  }
  RunConfig c = default_config();
  Section top(&root, "");

  {
    Section n = top.sub("network");
    int neurons = c.setup.geom.n_neurons;
    n.integer("n_neurons", neurons);
    if (neurons < 1) throw config_error(n.field("n_neurons"), "must be >= 1");
    c.setup = LinkSetup::defaults(neurons);
    n.integer("q_count", c.setup.grid.q_count);
    n.quantity("fsr", Dim::Frequency, c.setup.grid.fsr_hz);
    n.quantity("center_freq", Dim::Frequency, c.setup.grid.center_freq_hz);
    double ng = 4.4;
    n.quantity("group_index", Dim::None, ng);
    n.finish();
    wrap_invalid(n.field("q_count"), [&] {
      c.setup.grid.validate();
      if (c.setup.grid.q_count < min_comb_lines(neurons, Variant::SharedPilot))
        throw std::invalid_argument("below the minimum 4N-1 comb lines");
    });
    c.setup.geom = make_geometry(neurons, Variant::SharedPilot, c.setup.grid, ng);
  }
  {
    Section b = top.sub("budget");
    std::vector<LossComponent> comps = default_loss_components();
    if (b.has("losses")) {
      const json& arr = b.raw("losses");
      if (!arr.is_array()) throw config_error(b.field("losses"), "expected an array");
      comps.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section e(&arr[i], b.field("losses[" + std::to_string(i) + "]"));
        if (!e.has("name")) throw config_error(e.field("name"), "missing required field");
        if (!e.has("db")) throw config_error(e.field("db"), "missing required field");
        LossComponent lc;
        lc.name = e.str("name", "");
        lc.db = parse_quantity(e.raw("db"), Dim::None, e.field("db"));
        const std::string cls = e.str("class", "common");
        if (cls == "common")
          lc.cls = LossClass::Common;
        else if (cls == "signal_only")
          lc.cls = LossClass::SignalOnly;
        else
          throw config_error(e.field("class"), "expected 'common' or 'signal_only'");
        e.finish();
        if (lc.db < 0) throw config_error(e.field("db"), "negative loss is not allowed");
        comps.push_back(lc);
      }
    }
    LinkBudget base;
    b.quantity("comb_power", Dim::Power, base.comb_power_w);
    b.quantity("responsivity", Dim::None, base.responsivity_a_per_w);
    wrap_invalid(b.field("losses"), [&] { c.setup.budget = link_budget_assemble(comps, base); });
    b.quantity("ll_r_db", Dim::None, c.setup.budget.ll_r_db);
    b.quantity("ll_mod_db", Dim::None, c.setup.budget.ll_mod_db);
    b.finish();
    if (c.setup.budget.ll_r_db < 0) throw config_error(b.field("ll_r_db"), "negative loss is not allowed");
    if (c.setup.budget.ll_mod_db < 0) throw config_error(b.field("ll_mod_db"), "negative loss is not allowed");
    wrap_invalid(b.field("comb_power"), [&] { c.setup.budget.validate(); });
  }
  {
    Section n = top.sub("noise");
    n.quantity("i_n", Dim::CurrentDensity, c.setup.noise.i_n_a_sqrt_hz);
    n.quantity("rin_db_hz", Dim::None, c.setup.noise.rin_db_hz);
    n.quantity("lw_opt", Dim::Frequency, c.setup.noise.lw_opt_hz);
    n.quantity("lw_rf", Dim::Frequency, c.setup.noise.lw_rf_hz);
    n.quantity("ase_psd_w_hz", Dim::None, c.setup.noise.ase_psd_w_hz);
    n.finish();
    c.setup.noise.responsivity = c.setup.budget.responsivity_a_per_w;
    wrap_invalid(n.field(""), [&] { c.setup.noise.validate(); });
  }
  {
    Section d = top.sub("devices");
    if (d.has("dcs_coupling_table") || d.has("dcs_gd_table")) {
      const std::string cp = d.str("dcs_coupling_table", resolve_data_path("dcs_coupling.tsv"));
      const std::string gp = d.str("dcs_gd_table", resolve_data_path("dcs_gd_imbalance.tsv"));
      try {
        c.setup.dcs = DcsModel::load(cp, gp);
      } catch (const std::exception& e) {
        throw config_error(d.field("dcs_coupling_table"), e.what());
      }
    }
    d.quantity("modulator_v_pi", Dim::None, c.setup.modulator.v_pi);
    d.quantity("modulator_efficiency_slope", Dim::None, c.setup.modulator.efficiency_slope);
    d.finish();
  }
  {
    Section s = top.sub("sim");
    SimConfig& m = c.sim;
    s.quantity("dt", Dim::Time, m.dt_s);
    s.quantity("symbol", Dim::Time, m.symbol_s);
    s.integer("n_symbols", m.n_symbols);
    if (s.has("symbol") || s.has("n_symbols")) m.duration_s = m.n_symbols * m.symbol_s;
    s.quantity("duration", Dim::Time, m.duration_s);
    const std::string shape = s.str("comb_shape", "sech2");
    if (shape == "sech2")
      m.comb_shape = CombShape::Sech2;
    else if (shape == "square")
      m.comb_shape = CombShape::Square;
    else
      throw config_error(s.field("comb_shape"), "expected 'sech2' or 'square'");
    s.quantity("fwhm_rel", Dim::None, m.fwhm_rel);
    s.uinteger("rng_seed", m.rng_seed);
    if (s.has("toggles")) {
      const json& t = s.raw("toggles");
      if (t.is_string()) {
        if (t.get<std::string>() == "all")
          m.toggles = Toggles::all();
        else if (t.get<std::string>() != "none")
          throw config_error(s.field("toggles"), "expected 'all', 'none' or an object");
      } else {
        read_toggles(Section(&t, s.field("toggles")), m.toggles);
      }
    }
    s.quantities("gd_mismatch", Dim::Time, m.gd_mismatch_fs);
    for (auto& v : m.gd_mismatch_fs) v *= 1e15;
    s.quantity("cutoff", Dim::Frequency, m.cutoff_hz);
    s.quantity("phase_amplitude_rad", Dim::None, m.phase_amplitude_rad);
    s.quantity("optical_span", Dim::Length, m.optical_span_m);
    s.quantity("wg_dispersion", Dim::Dispersion, m.wg_dispersion_ps_nm_km);
    s.quantity("star_gd_span", Dim::Time, m.star_gd_span_fs);
    if (s.has("star_gd_span")) m.star_gd_span_fs *= 1e15;
    s.finish();
    try {
      validate(m, c.setup);
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      std::string f = "sim";
      for (const char* k : {"dt", "duration", "symbol", "n_symbols", "fwhm_rel", "cutoff",
                            "phase_amplitude", "gd_mismatch", "q_count"})
        if (msg.find(k) != std::string::npos) {
          f = s.field(k == std::string("phase_amplitude") ? "phase_amplitude_rad" : k);
          break;
        }
      throw config_error(f, msg);
    }
  }
  {
    Section sw = top.sub("sweeps");
    read_sweep(sw.sub("fwhm"), c.fwhm, Dim::None);
    read_sweep(sw.sub("cutoff"), c.cutoff, Dim::Frequency);
    read_sweep(sw.sub("lw_opt"), c.lw_opt, Dim::Frequency);
    read_sweep(sw.sub("lw_rf"), c.lw_rf, Dim::Frequency);
    read_sweep(sw.sub("power"), c.power, Dim::Power);
    std::vector<double> gd_s;
    Section g = sw.sub("gd_mismatch");
    g.quantities("points", Dim::Time, gd_s);
    g.quantity("cutoff", Dim::Frequency, c.gd.cutoff_hz);
    g.quantity("fwhm_rel", Dim::None, c.gd.fwhm_rel);
    g.finish();
    if (!gd_s.empty()) {
      c.gd.points.clear();
      for (double v : gd_s) c.gd.points.push_back(v * 1e15);
    }
    sw.finish();
  }
  {
    Section f = top.sub("feasibility");
    f.quantities("mu", Dim::None, c.feasibility.mu);
    f.integer("trials", c.feasibility.trials);
    f.integer("n_units", c.feasibility.n_units);
    f.integer("q_count", c.feasibility.q_count);
    f.integer("starts", c.feasibility.solver.starts);
    f.integer("max_iter", c.feasibility.solver.max_iter);
    f.finish();
    for (double mu : c.feasibility.mu)
      if (!(mu > 0 && mu <= 1)) throw config_error(f.field("mu"), "each mu must be in (0, 1]");
    if (c.feasibility.trials < 1) throw config_error(f.field("trials"), "must be >= 1");
    if (c.feasibility.n_units < 1) throw config_error(f.field("n_units"), "must be >= 1");
    if (c.feasibility.q_count < 4 * c.feasibility.n_units - 1)
      throw config_error(f.field("q_count"), "below 4 n_units - 1");
    if (c.feasibility.solver.starts < 1) throw config_error(f.field("starts"), "must be >= 1");
  }
  {
    Section e = top.sub("equalizer");
    Section fe = e.sub("frontend");
    FrontEndConfig& F = c.equalizer.frontend;
    fe.integer("n_channels", F.n_channels);
    fe.quantity("channel_rate", Dim::Frequency, F.channel_rate);
    F.aggregate_rate = F.n_channels * F.channel_rate;
    fe.quantity("aggregate_rate", Dim::Frequency, F.aggregate_rate);
    fe.quantity("bandwidth", Dim::Frequency, F.bandwidth_hz);
    fe.quantity("drive_fraction", Dim::None, F.drive_fraction);
    fe.quantities("leakage_kernel", Dim::None, F.leakage_kernel);
    fe.quantity("frontend_noise_std", Dim::None, F.frontend_noise_std);
    fe.finish();
    wrap_invalid(fe.field(""), [&] { F.validate(); });
    Section ds = e.sub("dataset");
    DatasetConfig& D = c.equalizer.dataset;
    ds.integer("n_freqs", D.n_freqs);
    ds.quantity("f_lo", Dim::Frequency, D.f_lo);
    ds.quantity("f_hi", Dim::Frequency, D.f_hi);
    ds.integer("samples_per_waveform", D.samples_per_waveform);
    ds.integer("channel", D.channel);
    ds.quantity("full_scale", Dim::None, D.full_scale);
    ds.finish();
    if (D.n_freqs < 2) throw config_error(ds.field("n_freqs"), "must be >= 2");
    if (!(D.f_lo > 0 && D.f_hi <= F.bandwidth_hz && D.f_lo < D.f_hi))
      throw config_error(ds.field("f_hi"), "frequencies must lie in (0, bandwidth]");
    if (D.channel < 0 || D.channel >= F.n_channels) throw config_error(ds.field("channel"), "out of range");
    read_equalizer(e.sub("analog"), c.equalizer.analog);
    read_equalizer(e.sub("analog_noisy"), c.equalizer.analog_noisy);
    read_equalizer(e.sub("digital"), c.equalizer.digital);
    e.quantities("noise_scales", Dim::None, c.equalizer.noise_scales);
    e.finish();
  }
  top.finish();
  c.normalized = normalize(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("", "cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

json normalize(const RunConfig& c) {
  const auto& s = c.setup;
  json j;
  j["network"] = {{"n_neurons", s.geom.n_neurons},
                  {"q_count", s.grid.q_count},
                  {"fsr", s.grid.fsr_hz},
                  {"center_freq", s.grid.center_freq_hz},
                  {"group_index", s.geom.group_index}};
  j["budget"] = {{"comb_power", s.budget.comb_power_w},
                 {"responsivity", s.budget.responsivity_a_per_w},
                 {"ll_r_db", s.budget.ll_r_db},
                 {"ll_mod_db", s.budget.ll_mod_db}};
  j["noise"] = {{"i_n", s.noise.i_n_a_sqrt_hz},
                {"rin_db_hz", s.noise.rin_db_hz},
                {"lw_opt", s.noise.lw_opt_hz},
                {"lw_rf", s.noise.lw_rf_hz},
                {"ase_psd_w_hz", s.noise.ase_psd_w_hz}};
  j["devices"] = {{"modulator_v_pi", s.modulator.v_pi},
                  {"modulator_efficiency_slope", s.modulator.efficiency_slope}};
  std::vector<double> gd_s;
  for (double v : c.sim.gd_mismatch_fs) gd_s.push_back(v * 1e-15);
  j["sim"] = {{"dt", c.sim.dt_s},
              {"symbol", c.sim.symbol_s},
              {"n_symbols", c.sim.n_symbols},
              {"duration", c.sim.duration_s},
              {"comb_shape", c.sim.comb_shape == CombShape::Sech2 ? "sech2" : "square"},
              {"fwhm_rel", c.sim.fwhm_rel},
              {"rng_seed", c.sim.rng_seed},
              {"toggles", toggles_json(c.sim.toggles)},
              {"gd_mismatch", gd_s},
              {"cutoff", c.sim.cutoff_hz},
              {"phase_amplitude_rad", c.sim.phase_amplitude_rad},
              {"optical_span", c.sim.optical_span_m},
              {"wg_dispersion", c.sim.wg_dispersion_ps_nm_km},
              {"star_gd_span", c.sim.star_gd_span_fs * 1e-15}};
  std::vector<double> gdp;
  for (double v : c.gd.points) gdp.push_back(v * 1e-15);
  j["sweeps"] = {{"fwhm", sweep_json(c.fwhm)},
                 {"cutoff", sweep_json(c.cutoff)},
                 {"lw_opt", sweep_json(c.lw_opt)},
                 {"lw_rf", sweep_json(c.lw_rf)},
                 {"power", sweep_json(c.power)},
                 {"gd_mismatch", {{"points", gdp}, {"cutoff", c.gd.cutoff_hz}, {"fwhm_rel", c.gd.fwhm_rel}}}};
  j["feasibility"] = {{"mu", c.feasibility.mu},
                      {"trials", c.feasibility.trials},
                      {"n_units", c.feasibility.n_units},
                      {"q_count", c.feasibility.q_count},
                      {"starts", c.feasibility.solver.starts},
                      {"max_iter", c.feasibility.solver.max_iter}};
  const auto& F = c.equalizer.frontend;
  const auto& D = c.equalizer.dataset;
  auto eq = [](const EqualizerConfig& e) {
    return json{{"hidden", e.hidden}, {"noise_scale", e.noise_scale}, {"init_seed", e.init_seed},
                {"train", train_json(e.train)}};
  };
  j["equalizer"] = {
      {"frontend",
       {{"n_channels", F.n_channels},
        {"channel_rate", F.channel_rate},
        {"aggregate_rate", F.aggregate_rate},
        {"bandwidth", F.bandwidth_hz},
        {"drive_fraction", F.drive_fraction},
        {"leakage_kernel", F.leakage_kernel},
        {"frontend_noise_std", F.frontend_noise_std}}},
      {"dataset",
       {{"n_freqs", D.n_freqs},
        {"f_lo", D.f_lo},
        {"f_hi", D.f_hi},
        {"samples_per_waveform", D.samples_per_waveform},
        {"channel", D.channel},
        {"full_scale", D.full_scale}}},
      {"analog", eq(c.equalizer.analog)},
      {"analog_noisy", eq(c.equalizer.analog_noisy)},
      {"digital", eq(c.equalizer.digital)},
      {"noise_scales", c.equalizer.noise_scales}};
  return j;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace oddm
