#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::eval {

inline constexpr double kSegmentSeconds = 9.6;
inline constexpr std::size_t kSegmentShift = 30;  // samples between consecutive test segments

/// A run of `n_segments` consecutive 1-s-shifted test segments.
struct EvaluationWindow {
  std::size_t n_segments = 1;

  double duration_s() const { return static_cast<double>(n_segments - 1) + kSegmentSeconds; }

  /// 30.6 s -> 22 segments, 60.6 s -> 52 segments; durations must be 9.6 s plus whole seconds.
  static EvaluationWindow from_seconds(double seconds) {
    const double extra = seconds - kSegmentSeconds;
    const double whole = std::round(extra);
    if (!(extra >= -1e-9) || std::abs(extra - whole) > 1e-6)
      throw ParameterError("evaluation window " + std::to_string(seconds) +
                           " s is not 9.6 s plus a whole number of seconds");
    return {static_cast<std::size_t>(whole) + 1};
  }

  friend bool operator==(const EvaluationWindow&, const EvaluationWindow&) = default;
};

/// Per-sample mean of every segment covering that sample. Segment j starts at
/// offsets[j] (relative to the first sample of the fused span, ascending).
inline std::vector<double> fuse_at_offsets(std::span<const std::vector<double>> segments,
                                           std::span<const std::size_t> offsets) {
  if (segments.empty()) throw EvaluationError("fusion needs at least one segment");
  if (segments.size() != offsets.size()) throw EvaluationError("fusion: one offset per segment required");
  std::size_t end = 0;
  for (std::size_t j = 0; j < segments.size(); ++j) end = std::max(end, offsets[j] + segments[j].size());
  std::vector<double> sum(end, 0.0);
  std::vector<std::size_t> count(end, 0);
  for (std::size_t j = 0; j < segments.size(); ++j)
    for (std::size_t t = 0; t < segments[j].size(); ++t) {
      sum[offsets[j] + t] += segments[j][t];
      ++count[offsets[j] + t];
    }
  for (std::size_t t = 0; t < end; ++t) {
    if (count[t] == 0) throw EvaluationError("fusion: gap in coverage at sample " + std::to_string(t));
    sum[t] /= static_cast<double>(count[t]);
  }
  return sum;
}

/// Fusion of segments laid out at a fixed stride (30 samples for test segments).
inline std::vector<double> fuse_segments(std::span<const std::vector<double>> segments,
                                         std::size_t stride = kSegmentShift) {
  std::vector<std::size_t> offsets(segments.size());
  for (std::size_t j = 0; j < segments.size(); ++j) offsets[j] = j * stride;
  return fuse_at_offsets(segments, offsets);
}

}  // namespace respwave::eval
