#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::eval {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Iterative radix-2 decimation-in-time FFT with precomputed twiddles.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddle_(n / 2), bitrev_(n) {
    if (!is_power_of_two(n)) throw ParameterError("FFT size must be a power of two, got " + std::to_string(n));
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// In-place forward transform X[k] = sum_t x[t] exp(-2 pi i k t / n).
  void forward(std::span<std::complex<double>> x) const {
    if (x.size() != n_) throw ShapeError("FFT input length does not match plan");
    for (std::size_t i = 0; i < n_; ++i)
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len)
        for (std::size_t j = 0; j < half; ++j) {
          const auto w = twiddle_[j * step];
          const auto u = x[start + j];
          const auto v = x[start + j + half] * w;
          x[start + j] = u + v;
          x[start + j + half] = u - v;
        }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<std::size_t> bitrev_;
};

inline std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> out(x.begin(), x.end());
  FftPlan(x.size()).forward(out);
  return out;
}

}  // namespace respwave::eval
