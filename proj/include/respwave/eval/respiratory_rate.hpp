#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"
#include "respwave/eval/fft.hpp"

namespace respwave::eval {

struct RrOptions {
  double sample_rate = 30.0;
  double band_lo_bpm = 4.0;
  double band_hi_bpm = 65.0;
  std::size_t pad_to = 16384;
};

/// Dominant respiratory rate: mean-subtract, zero-pad, FFT, and return 60x the
/// frequency of the largest magnitude bin inside the band.
inline double estimate_rr_fft(std::span<const double> waveform, const RrOptions& opt = {}) {
  if (static_cast<double>(waveform.size()) < 2.0 * opt.sample_rate)
    throw EvaluationError("respiratory-rate estimation needs at least 2 s of samples");
  double mean = 0.0;
  for (double v : waveform) mean += v;
  mean /= static_cast<double>(waveform.size());
  double peak_abs = 0.0;
  for (double v : waveform) peak_abs = std::max(peak_abs, std::abs(v - mean));
  if (!(peak_abs > 1e-12 * std::max(1.0, std::abs(mean)))) throw EvaluationError("no spectral peak: waveform is constant");

  const std::size_t n = next_power_of_two(std::max(opt.pad_to, waveform.size()));
  // Plans are immutable once built, so a per-thread cache keeps repeated calls cheap.
  thread_local std::map<std::size_t, std::shared_ptr<const FftPlan>> plans;
  auto& plan = plans[n];
  if (!plan) plan = std::make_shared<const FftPlan>(n);

  std::vector<std::complex<double>> buf(n);
  for (std::size_t j = 0; j < waveform.size(); ++j) buf[j] = waveform[j] - mean;
  plan->forward(buf);

  const double df = opt.sample_rate / static_cast<double>(n);
  const auto k_lo = static_cast<std::size_t>(std::ceil(opt.band_lo_bpm / 60.0 / df));
  const auto k_hi = std::min(n / 2, static_cast<std::size_t>(std::floor(opt.band_hi_bpm / 60.0 / df)));
  if (k_lo > k_hi) throw EvaluationError("respiratory band contains no FFT bins");
  std::size_t best = k_lo;
  double best_mag = -1.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double mag = std::norm(buf[k]);
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  return 60.0 * static_cast<double>(best) * df;
}

}  // namespace respwave::eval
