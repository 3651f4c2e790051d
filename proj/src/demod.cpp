#include "oddm/demod.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace oddm {
namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const cplx kI(0.0, 1.0);

Mat2 mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

Mat2 coupler3db() { return {kInvSqrt2, kI * kInvSqrt2, kI * kInvSqrt2, kInvSqrt2}; }
Mat2 phase_upper(double th) { return {1.0, 0.0, 0.0, std::polar(1.0, th)}; }
Mat2 dphase_upper(double th) { return {0.0, 0.0, 0.0, kI * std::polar(1.0, th)}; }
Mat2 fixed_coupler(double kappa) {
  const double t = std::sqrt(1.0 - kappa), k = std::sqrt(kappa);
  return {t, kI * k, kI * k, t};
}

int params_per_unit(UnitVariant v) { return v == UnitVariant::TunableMzi ? 2 : 1; }

// dU/d(theta_a) and dU/d(theta_b)
void unit_derivatives(const ReceiverUnit& u, Mat2& da, Mat2& db) {
  if (u.variant == UnitVariant::TunableMzi) {
    const Mat2 c = coupler3db();
    const Mat2 inner = mul(c, mul(phase_upper(u.theta_b), c));
    da = mul(inner, dphase_upper(u.theta_a));
    db = mul(c, mul(dphase_upper(u.theta_b), mul(c, phase_upper(u.theta_a))));
  } else {
    da = mul(fixed_coupler(u.split_ratio), dphase_upper(u.theta_a));
    db = {0.0, 0.0, 0.0, 0.0};
  }
}

// small dense solve, partial pivoting; a is n x n row-major and is overwritten
bool solve_linear(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (int k = 0; k < n; ++k) std::swap(a[col * n + k], a[piv * n + k]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r * n + k] * b[k];
    b[r] = s / a[r * n + r];
  }
  return true;
}

}  // namespace

Mat2 unit_matrix(const ReceiverUnit& u) {
  if (u.variant == UnitVariant::TunableMzi) {
    const Mat2 c = coupler3db();
    return mul(c, mul(phase_upper(u.theta_b), mul(c, phase_upper(u.theta_a))));
  }
  return mul(fixed_coupler(u.split_ratio), phase_upper(u.theta_a));
}

DemodCascade DemodCascade::make(int n_units, UnitVariant variant, double unit_delay_s,
                                double split_ratio) {
  DemodCascade c;
  c.unit_delay_s = unit_delay_s;
  ReceiverUnit u;
  u.variant = variant;
  u.split_ratio = split_ratio;
  c.units.assign(n_units, u);
  return c;
}

int DemodCascade::n_params() const {
  int n = 1;
  for (const auto& u : units) n += params_per_unit(u.variant);
  return n;
}

std::vector<double> DemodCascade::params() const {
  std::vector<double> p;
  p.reserve(n_params());
  for (const auto& u : units) {
    p.push_back(u.theta_a);
    if (u.variant == UnitVariant::TunableMzi) p.push_back(u.theta_b);
  }
  p.push_back(final_phase);
  return p;
}

void DemodCascade::set_params(const std::vector<double>& p) {
  if (static_cast<int>(p.size()) != n_params())
    throw std::invalid_argument("parameter vector length mismatch");
  std::size_t i = 0;
  for (auto& u : units) {
    u.theta_a = p[i++];
    if (u.variant == UnitVariant::TunableMzi) u.theta_b = p[i++];
  }
  final_phase = p[i];
}

void DemodCascade::validate() const {
  if (units.empty()) throw std::invalid_argument("cascade has no units");
  for (const auto& u : units)
    if (!(u.split_ratio > 0.0 && u.split_ratio < 1.0))
      throw std::invalid_argument("split_ratio must be in (0, 1)");
}

std::vector<cplx> cascade_coefficients(const DemodCascade& c) {
  const int n = c.n_units();
  std::vector<cplx> p0(n + 1, 0.0), p1(n + 1, 0.0);
  p0[0] = 1.0;
  for (int j = 0; j < n; ++j) {
    const Mat2 u = unit_matrix(c.units[j]);
    std::vector<cplx> q1(n + 1, 0.0);
    for (int k = 0; k <= j; ++k) {
      const cplx a = p0[k], b = p1[k];
      p0[k] = u[0] * a + u[1] * b;
      q1[k] = u[2] * a + u[3] * b;
    }
    // delay on port 1
    std::fill(p1.begin(), p1.end(), 0.0);
    for (int k = 0; k <= j; ++k) p1[k + 1] = q1[k];
  }
  const cplx g = std::polar(1.0, c.final_phase);
  std::vector<cplx> a(n);
  for (int k = 0; k < n; ++k) a[k] = g * p0[k];
  return a;
}

Mat2 cascade_matrix(const DemodCascade& c, cplx z) {
  Mat2 t{1.0, 0.0, 0.0, 1.0};
  const Mat2 d{1.0, 0.0, 0.0, z};
  for (const auto& u : c.units) t = mul(d, mul(unit_matrix(u), t));
  const cplx g = std::polar(1.0, c.final_phase);
  t[0] *= g;
  t[1] *= g;
  return t;
}

cplx cascade_response(const DemodCascade& c, double f_hz) {
  const auto a = cascade_coefficients(c);
  const cplx z = std::polar(1.0, -2.0 * kPi * std::fmod(f_hz * c.unit_delay_s, 1.0));
  cplx acc = 0.0;
  for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) acc = acc * z + a[k];
  return acc;
}

std::vector<double> cascade_coefficients_vjp(const DemodCascade& c, const std::vector<cplx>& g) {
  const int n = c.n_units();
  if (static_cast<int>(g.size()) != n) throw std::invalid_argument("gradient length mismatch");
  // forward pass, keeping each unit's input state
  std::vector<std::vector<cplx>> s0(n), s1(n);
  std::vector<cplx> p0(n + 1, 0.0), p1(n + 1, 0.0);
  p0[0] = 1.0;
  std::vector<Mat2> um(n);
  for (int j = 0; j < n; ++j) {
    s0[j] = p0;
    s1[j] = p1;
    um[j] = unit_matrix(c.units[j]);
    const Mat2& u = um[j];
    std::vector<cplx> q1(n + 1, 0.0);
    for (int k = 0; k <= j; ++k) {
      const cplx a = p0[k], b = p1[k];
      p0[k] = u[0] * a + u[1] * b;
      q1[k] = u[2] * a + u[3] * b;
    }
    std::fill(p1.begin(), p1.end(), 0.0);
    for (int k = 0; k <= j; ++k) p1[k + 1] = q1[k];
  }

  std::vector<double> grad(c.n_params(), 0.0);
  const cplx gphase = std::polar(1.0, c.final_phase);
  double dfinal = 0.0;
  for (int k = 0; k < n; ++k) dfinal += std::real(std::conj(g[k]) * kI * gphase * p0[k]);
  grad.back() = dfinal;

  // adjoint of the state after the last unit
  std::vector<cplx> a0(n + 1, 0.0), a1(n + 1, 0.0);
  for (int k = 0; k < n; ++k) a0[k] = std::conj(gphase) * g[k];

  int pidx = c.n_params() - 1;
  for (int j = n - 1; j >= 0; --j) {
    // adjoint through the delay: q1[k] -> p1[k+1]
    std::vector<cplx> aq0 = a0, aq1(n + 1, 0.0);
    for (int k = 0; k < n; ++k) aq1[k] = a1[k + 1];
    Mat2 da, db;
    unit_derivatives(c.units[j], da, db);
    double gra = 0.0, grb = 0.0;
    const Mat2& u = um[j];
    std::vector<cplx> na0(n + 1, 0.0), na1(n + 1, 0.0);
    for (int k = 0; k <= j; ++k) {
      const cplx x0 = s0[j][k], x1 = s1[j][k];
      const cplx ya0 = da[0] * x0 + da[1] * x1, ya1 = da[2] * x0 + da[3] * x1;
      gra += std::real(std::conj(aq0[k]) * ya0 + std::conj(aq1[k]) * ya1);
      if (c.units[j].variant == UnitVariant::TunableMzi) {
        const cplx yb0 = db[0] * x0 + db[1] * x1, yb1 = db[2] * x0 + db[3] * x1;
        grb += std::real(std::conj(aq0[k]) * yb0 + std::conj(aq1[k]) * yb1);
      }
      na0[k] = std::conj(u[0]) * aq0[k] + std::conj(u[2]) * aq1[k];
      na1[k] = std::conj(u[1]) * aq0[k] + std::conj(u[3]) * aq1[k];
    }
    if (c.units[j].variant == UnitVariant::TunableMzi) {
      grad[--pidx] = grb;
      grad[--pidx] = gra;
    } else {
      grad[--pidx] = gra;
    }
    a0 = std::move(na0);
    a1 = std::move(na1);
  }
  return grad;
}

CombLineVector cascade_transfer(const DemodCascade& c, const CombGrid& grid) {
  const auto a = cascade_coefficients(c);
  CombLineVector out{std::vector<cplx>(grid.q_count)};
  for (int q = 0; q < grid.q_count; ++q) {
    const cplx z = std::polar(1.0, -2.0 * kPi * std::fmod(q * grid.fsr_hz * c.unit_delay_s, 1.0));
    cplx acc = 0.0;
    for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) acc = acc * z + a[k];
    out.v[q] = acc;
  }
  return out;
}

ChannelVector weights_from_settings(const DemodCascade& c, const CombGrid& grid) {
  return to_channel_basis(cascade_transfer(c, grid), grid);
}

double deviation(const std::vector<cplx>& actual, const std::vector<cplx>& target) {
  if (actual.size() != target.size()) throw std::invalid_argument("deviation: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    num += std::norm(actual[i] - target[i]);
    den += std::norm(target[i]);
  }
  if (den == 0.0) throw std::invalid_argument("deviation: zero target");
  return std::sqrt(num / den);
}

ChannelVector mu_rescale(const ChannelVector& target, double mu, const CombGrid& grid) {
  const auto v = to_comb_basis(target, grid);
  double mx = 0.0;
  for (const auto& x : v.v) mx = std::max(mx, std::abs(x));
  if (mx == 0.0) throw std::invalid_argument("target is zero");
  ChannelVector out = target;
  for (auto& x : out.v) x *= mu / mx;
  return out;
}

SolveResult solve_settings(const ChannelVector& target, int n_units, const CombGrid& grid,
                           const SolverConfig& cfg) {
  const double unit_delay = grid.tau0();
  const int n = n_units;
  // coefficients beyond the cascade length cannot be produced; they only add to the error
  std::vector<cplx> t(n, 0.0);
  double tail = 0.0, tnorm = 0.0;
  for (std::size_t i = 0; i < target.v.size(); ++i) {
    tnorm += std::norm(target.v[i]);
    if (static_cast<int>(i) < n)
      t[i] = target.v[i];
    else
      tail += std::norm(target.v[i]);
  }
  if (tnorm == 0.0) throw std::invalid_argument("target is zero");

  SolveResult best;
  best.cascade = DemodCascade::make(n, cfg.variant, unit_delay, cfg.split_ratio);
  best.deviation = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  const int m = 2 * n;

  for (int start = 0; start < cfg.starts; ++start) {
    DemodCascade c = DemodCascade::make(n, cfg.variant, unit_delay, cfg.split_ratio);
    const int np = c.n_params();
    std::vector<double> p(np);
    for (auto& x : p) x = uni(rng);
    c.set_params(p);

    auto residual = [&](const DemodCascade& cc, std::vector<double>& r) {
      const auto a = cascade_coefficients(cc);
      r.resize(m);
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        const cplx d = a[k] - t[k];
        r[2 * k] = d.real();
        r[2 * k + 1] = d.imag();
        s += std::norm(d);
      }
      return s;
    };

    std::vector<double> r;
    double cost = residual(c, r);
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
      if (std::sqrt((cost + tail) / tnorm) < cfg.stop_deviation) {
        converged = true;
        break;
      }
      // Jacobian rows via reverse mode
      std::vector<double> jac(static_cast<std::size_t>(m) * np);
      for (int k = 0; k < n; ++k) {
        std::vector<cplx> g(n, 0.0);
        g[k] = 1.0;
        auto gr = cascade_coefficients_vjp(c, g);
        std::copy(gr.begin(), gr.end(), jac.begin() + static_cast<std::size_t>(2 * k) * np);
        g[k] = kI;
        gr = cascade_coefficients_vjp(c, g);
        std::copy(gr.begin(), gr.end(), jac.begin() + static_cast<std::size_t>(2 * k + 1) * np);
      }
      std::vector<double> jtj(static_cast<std::size_t>(np) * np, 0.0), jtr(np, 0.0);
      for (int i = 0; i < m; ++i)
        for (int a = 0; a < np; ++a) {
          const double ja = jac[static_cast<std::size_t>(i) * np + a];
          if (ja == 0.0) continue;
          jtr[a] += ja * r[i];
          for (int b = 0; b < np; ++b) jtj[a * np + b] += ja * jac[static_cast<std::size_t>(i) * np + b];
        }
      bool improved = false;
      for (int tries = 0; tries < 12; ++tries) {
        std::vector<double> a = jtj, b(np);
        for (int i = 0; i < np; ++i) {
          a[i * np + i] += lambda * (jtj[i * np + i] + 1e-9);
          b[i] = -jtr[i];
        }
        if (!solve_linear(a, b, np)) {
          lambda *= 10;
          continue;
        }
        DemodCascade trial = c;
        std::vector<double> pt = c.params();
        for (int i = 0; i < np; ++i) pt[i] += b[i];
        trial.set_params(pt);
        std::vector<double> rt;
        const double ct = residual(trial, rt);
        if (ct < cost) {
          const double rel = (cost - ct) / std::max(cost, 1e-300);
          c = trial;
          r = rt;
          cost = ct;
          lambda = std::max(lambda / 3.0, 1e-12);
          improved = true;
          if (rel < 1e-12) it = cfg.max_iter;  // stalled
          break;
        }
        lambda *= 4.0;
      }
      if (!improved) break;
    }
    const double dev = std::sqrt((cost + tail) / tnorm);
    if (dev < best.deviation) {
      best.cascade = c;
      best.deviation = dev;
      best.converged = converged || dev < cfg.stop_deviation;
    }
    if (best.deviation < cfg.stop_deviation) break;
  }
  // wrap stored angles for readability
  auto p = best.cascade.params();
  for (auto& x : p) x = wrap_phase(x);
  best.cascade.set_params(p);
  return best;
}

SolveResult solve_settings(const ChannelVector& target, double mu, int n_units,
                           const CombGrid& grid, const SolverConfig& cfg) {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must be in (0, 1]");
  return solve_settings(mu_rescale(target, mu, grid), n_units, grid, cfg);
}

std::string FeasibilityScenario::label() const {
  if (kind == ScenarioKind::AllRandom) return "all_random";
  return "equal_subset_" + std::to_string(subset_m);
}

void FeasibilityScenario::validate() const {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must be in (0, 1]");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (kind == ScenarioKind::EqualSubset && (subset_m < 1 || subset_m > n_units))
    throw std::invalid_argument("subset_m must be in 1..n_units");
  if (q_count < n_units) throw std::invalid_argument("q_count must be >= n_units");
}

ChannelVector feasibility_target(const FeasibilityScenario& s, int trial) {
  std::uint64_t tag = s.kind == ScenarioKind::AllRandom ? 0x100 : 0x200 + s.subset_m;
  std::mt19937_64 rng(derive_seed(derive_seed(s.seed, tag), static_cast<std::uint64_t>(trial)));
  std::uniform_real_distribution<double> ph(-kPi, kPi), mag(0.0, 1.0);
  ChannelVector t{std::vector<cplx>(s.q_count, 0.0)};
  if (s.kind == ScenarioKind::AllRandom) {
    for (int m = 0; m < s.n_units; ++m) {
      const double r = mag(rng);
      t.v[m] = std::polar(r, ph(rng));
    }
  } else {
    std::vector<int> idx(s.n_units);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < s.subset_m; ++i) t.v[idx[i]] = std::polar(1.0, ph(rng));
  }
  return t;
}

FeasibilityRecord feasibility_experiment(const FeasibilityScenario& s, const SolverConfig& cfg,
                                         int jobs) {
  s.validate();
  CombGrid grid;
  grid.q_count = s.q_count;
  std::atomic<int> next{0}, f_lo{0}, f_hi{0};
  std::mutex mx;
  double max_dev = 0.0;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= s.trials) break;
      const auto target = feasibility_target(s, i);
      SolverConfig sc = cfg;
      sc.seed = derive_seed(cfg.seed ^ 0x5eed, static_cast<std::uint64_t>(i));
      const auto res = solve_settings(target, s.mu, s.n_units, grid, sc);
      if (res.deviation > s.threshold_lo) ++f_lo;
      if (res.deviation > s.threshold_hi) ++f_hi;
      std::lock_guard<std::mutex> lock(mx);
      max_dev = std::max(max_dev, res.deviation);
    }
  };
  const int nt = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return {s.label(), s.mu, s.trials, f_lo.load(), f_hi.load(), s.seed, max_dev};
}

std::vector<FeasibilityScenario> standard_scenarios(double mu, int trials, std::uint64_t seed) {
  std::vector<FeasibilityScenario> out;
  FeasibilityScenario a;
  a.kind = ScenarioKind::AllRandom;
  a.mu = mu;
  a.trials = trials;
  a.seed = seed;
  out.push_back(a);
  for (int m : {1, 3, 5, 7}) {
    FeasibilityScenario e = a;
    e.kind = ScenarioKind::EqualSubset;
    e.subset_m = m;
    out.push_back(e);
  }
  return out;
}

}  // namespace oddm
