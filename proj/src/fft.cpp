#include "oddm/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace oddm {
namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;

PlanPair plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> scratch(n);
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair pp;
  pp.fwd = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD, flags);
  pp.bwd = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_BACKWARD, flags);
  cache.emplace(n, pp);
  return pp;
}

}  // namespace

void fft_forward(std::vector<cplx>& x) {
  if (x.empty()) return;
  auto pp = plans_for(x.size());
  auto* p = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(pp.fwd, p, p);
}

void fft_inverse(std::vector<cplx>& x) {
  if (x.empty()) return;
  auto pp = plans_for(x.size());
  auto* p = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(pp.bwd, p, p);
  const double s = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v *= s;
}

double bin_frequency(std::size_t k, std::size_t n, double dt) {
  const double df = 1.0 / (n * dt);
  return (k < (n + 1) / 2) ? k * df : (static_cast<double>(k) - static_cast<double>(n)) * df;
}

std::vector<double> delay_real(const std::vector<double>& x, double dt, double tau) {
  if (tau == 0.0) return x;
  std::vector<cplx> X(x.begin(), x.end());
  fft_forward(X);
  const std::size_t n = X.size();
  for (std::size_t k = 0; k < n; ++k) {
    double f = bin_frequency(k, n, dt);
    if (n % 2 == 0 && k == n / 2) f = 0.0;  // keep the Nyquist bin real
    X[k] *= std::polar(1.0, -2.0 * kPi * f * tau);
  }
  fft_inverse(X);
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = X[k].real();
  return y;
}

}  // namespace oddm
