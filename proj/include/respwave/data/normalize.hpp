#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::data {

/// Per-recording min-max scaling onto [0, 1].
inline std::vector<double> normalize_target(std::span<const double> x) {
  if (x.empty()) throw DegenerateSignalError("cannot normalise an empty signal");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) throw DegenerateSignalError("constant signal cannot be min-max normalised");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - lo) / range;
  return out;
}

enum class InputNormalization { ZScore, MinMax, None };

inline InputNormalization parse_input_normalization(std::string_view s) {
  if (s == "zscore") return InputNormalization::ZScore;
  if (s == "minmax") return InputNormalization::MinMax;
  if (s == "none") return InputNormalization::None;
  throw ParameterError("unknown input normalisation '" + std::string(s) + "'");
}

inline std::string_view to_string(InputNormalization n) {
  switch (n) {
    case InputNormalization::ZScore: return "zscore";
    case InputNormalization::MinMax: return "minmax";
    case InputNormalization::None: return "none";
  }
  return "zscore";
}

/// Per-window standardisation to zero mean and unit (population) variance.
inline std::vector<double> normalize_input(std::span<const double> window) {
  if (window.empty()) throw DegenerateSignalError("empty window");
  const double n = static_cast<double>(window.size());
  double mean = 0.0;
  for (double v : window) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : window) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) throw DegenerateSignalError("constant window cannot be standardised");
  const double sd = std::sqrt(var);
  std::vector<double> out(window.size());
  for (std::size_t j = 0; j < window.size(); ++j) out[j] = (window[j] - mean) / sd;
  return out;
}

inline std::vector<double> normalize_input(std::span<const double> window, InputNormalization mode) {
  switch (mode) {
    case InputNormalization::ZScore: return normalize_input(window);
    case InputNormalization::MinMax: return normalize_target(window);
    case InputNormalization::None: return {window.begin(), window.end()};
  }
  return normalize_input(window);
}

}  // namespace respwave::data
