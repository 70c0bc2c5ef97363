#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::data {

inline constexpr double kTargetRate = 30.0;
inline constexpr double kAntiAliasCutoffHz = 13.0;

/// Odd-length Blackman-windowed sinc low-pass, unit DC gain. Three seconds of
/// support either side of centre gives a transition band just under 1 Hz.
inline std::vector<double> lowpass_taps(double fs, double cutoff_hz) {
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * fs));
  const std::size_t n = 2 * half + 1;
  const double fc = cutoff_hz / fs;
  std::vector<double> h(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = static_cast<double>(j) - static_cast<double>(half);
    const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double x = static_cast<double>(j) / static_cast<double>(n - 1);
    const double win = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * x) + 0.08 * std::cos(4.0 * std::numbers::pi * x);
    h[j] = sinc * win;
    sum += h[j];
  }
  for (double& v : h) v /= sum;
  return h;
}

/// Zero-phase FIR filtering (centred taps) with mirror extension at both ends.
inline std::vector<double> filter_zero_phase(std::span<const double> x, std::span<const double> taps) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps.size() / 2);
  auto at = [&](std::ptrdiff_t i) {
    if (n == 1) return x[0];
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return x[static_cast<std::size_t>(i < n ? i : period - i)];
  };
  std::vector<double> y(x.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) acc += taps[static_cast<std::size_t>(k + half)] * at(t + k);
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

/// Anti-alias low-pass (13 Hz) then linear interpolation onto the 30 Hz grid.
/// Output sample j sits at time j / 30 s; the last one is the final grid point
/// not after the last input sample, so duration is preserved within one sample.
inline std::vector<double> resample_to_30hz(std::span<const double> signal, double fs_in) {
  if (!(fs_in >= kTargetRate))
    throw ParameterError("unsupported upsample: input rate " + std::to_string(fs_in) + " Hz is below 30 Hz");
  if (fs_in == kTargetRate || signal.empty()) return {signal.begin(), signal.end()};

  const auto taps = lowpass_taps(fs_in, kAntiAliasCutoffHz);
  const auto smooth = filter_zero_phase(signal, taps);
  const double last_t = static_cast<double>(signal.size() - 1) / fs_in;
  const auto n_out = static_cast<std::size_t>(std::floor(last_t * kTargetRate + 1e-9)) + 1;
  std::vector<double> out(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double pos = static_cast<double>(j) * fs_in / kTargetRate;
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i0);
    out[j] = i0 + 1 < smooth.size() ? smooth[i0] + frac * (smooth[i0 + 1] - smooth[i0]) : smooth[i0];
  }
  return out;
}

}  // namespace respwave::data
