#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::eval {

inline double waveform_mae(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size())
    throw ShapeError("waveform_mae: lengths " + std::to_string(estimate.size()) + " and " +
                     std::to_string(reference.size()) + " differ");
  if (estimate.empty()) throw ShapeError("waveform_mae: empty waveforms");
  double s = 0.0;
  for (std::size_t j = 0; j < estimate.size(); ++j) s += std::abs(estimate[j] - reference[j]);
  return s / static_cast<double>(estimate.size());
}

/// Percentage of samples strictly below 0.5.
inline double duty_cycle(std::span<const double> waveform) {
  if (waveform.empty()) return 0.0;
  std::size_t below = 0;
  for (double v : waveform)
    if (v < 0.5) ++below;
  return 100.0 * static_cast<double>(below) / static_cast<double>(waveform.size());
}

inline double pearson_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson_corr: lengths differ");
  if (x.size() < 3) throw EvaluationError("pearson_corr needs at least 3 pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    mx += x[j];
    my += y[j];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double dx = x[j] - mx, dy = y[j] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw EvaluationError("correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Linear-interpolated quantile (q in [0, 1]) of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw EvaluationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double mean(std::span<const double> v) {
  if (v.empty()) throw EvaluationError("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct ErrorSummary {
  double mae_median_windows = 0.0;   // mAE: median over all windows
  double mmae_median_subjects = 0.0;  // mMAE: median over subjects of per-subject mean
  double q1_windows = 0.0;
  double q3_windows = 0.0;
  std::map<std::string, double> subject_mean;
  std::size_t n_windows = 0;
};

/// mAE / mMAE over absolute errors grouped by subject.
inline ErrorSummary aggregate_metrics(const std::map<std::string, std::vector<double>>& errors_by_subject) {
  ErrorSummary s;
  std::vector<double> all, means;
  for (const auto& [subject, errs] : errors_by_subject) {
    if (errs.empty()) continue;
    all.insert(all.end(), errs.begin(), errs.end());
    const double m = mean(errs);
    s.subject_mean[subject] = m;
    means.push_back(m);
  }
  if (all.empty()) throw EvaluationError("empty report: no windows to aggregate");
  s.n_windows = all.size();
  s.mae_median_windows = median(all);
  s.q1_windows = quantile(all, 0.25);
  s.q3_windows = quantile(all, 0.75);
  s.mmae_median_subjects = median(means);
  return s;
}

}  // namespace respwave::eval
