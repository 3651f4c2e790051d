#pragma once

#include <vector>

#include "oddm/core.hpp"

namespace oddm {

// Thin FFTW wrappers. Plans are built once per size with FFTW_ESTIMATE so
// results are reproducible run to run.

/// X[k] = sum_n x[n] e^{-2 pi i k n / L}
void fft_forward(std::vector<cplx>& x);
/// x[n] = (1/L) sum_k X[k] e^{+2 pi i k n / L}
void fft_inverse(std::vector<cplx>& x);

/// Signed frequency of DFT bin k for length n and step dt (two-sided layout).
double bin_frequency(std::size_t k, std::size_t n, double dt);

/// Applies a real-impulse-response filter given by H(f) for f >= 0 to a real signal.
template <class H>
std::vector<double> filter_real(const std::vector<double>& x, double dt, H&& h) {
  std::vector<cplx> X(x.begin(), x.end());
  fft_forward(X);
  const std::size_t n = X.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double f = bin_frequency(k, n, dt);
    const cplx g = h(f < 0 ? -f : f);
    X[k] *= (f < 0 ? std::conj(g) : g);
  }
  fft_inverse(X);
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = X[k].real();
  return y;
}

/// Circular fractional delay of a real periodic signal, y(t) = x(t - tau).
std::vector<double> delay_real(const std::vector<double>& x, double dt, double tau);

}  // namespace oddm
