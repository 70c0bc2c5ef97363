#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "respwave/data/normalize.hpp"
#include "respwave/data/recording.hpp"
#include "respwave/errors.hpp"

namespace respwave::data {

inline constexpr std::size_t kWindow = 288;           // 9.6 s at 30 Hz
inline constexpr std::size_t kTrainSegments = 50;     // 480 s / 9.6 s
inline constexpr std::size_t kTestStride = 30;        // 1 s shift
inline constexpr std::size_t kFullRecording = kWindow * kTrainSegments;

struct SegmentPair {
  std::vector<double> input;   // normalised PPG
  std::vector<double> target;  // respiratory reference in [0, 1]
  std::string subject_id;
  std::size_t start_index = 0;
};

struct SegmentSet {
  std::vector<SegmentPair> pairs;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;
};

namespace detail {

inline void cut_windows(const Recording& rec, std::size_t count, std::size_t stride, InputNormalization mode,
                        SegmentSet& out) {
  if (rec.ppg.size() != rec.resp_ref.size())
    throw DatasetError(rec.subject_id + ": ppg and resp lengths differ");
  const auto target = normalize_target(rec.resp_ref);
  out.pairs.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t start = s * stride;
    const std::span<const double> ppg(rec.ppg.data() + start, kWindow);
    SegmentPair pair;
    try {
      pair.input = normalize_input(ppg, mode);
    } catch (const DegenerateSignalError&) {
      ++out.skipped;
      out.warnings.push_back(rec.subject_id + ": skipped constant PPG window at sample " + std::to_string(start));
      continue;
    }
    pair.target.assign(target.begin() + static_cast<std::ptrdiff_t>(start),
                       target.begin() + static_cast<std::ptrdiff_t>(start + kWindow));
    pair.subject_id = rec.subject_id;
    pair.start_index = start;
    out.pairs.push_back(std::move(pair));
  }
}

}  // namespace detail

/// 50 consecutive non-overlapping windows at offsets 0, 288, ..., 14112.
/// Shorter recordings yield floor(L / 288) windows and a warning.
inline SegmentSet segment_training(const Recording& rec, InputNormalization mode = InputNormalization::ZScore) {
  SegmentSet out;
  std::size_t count = kTrainSegments;
  if (rec.length() < kFullRecording) {
    count = rec.length() / kWindow;
    out.warnings.push_back(rec.subject_id + ": recording has " + std::to_string(rec.length()) + " samples (< " +
                           std::to_string(kFullRecording) + "), using " + std::to_string(count) +
                           " training segments");
  }
  detail::cut_windows(rec, count, kWindow, mode, out);
  return out;
}

/// Number of 1-s-shifted test windows for a recording of `length` samples.
inline std::size_t test_segment_count(std::size_t length) {
  return length < kWindow ? 0 : (length - kWindow) / kTestStride + 1;
}

/// Sliding 288-sample windows shifted by 30 samples: offsets 0, 30, 60, ...
/// Constant windows are dropped (recorded in `skipped`); callers that need
/// a gap-free tiling check it.
inline SegmentSet segment_test(const Recording& rec, InputNormalization mode = InputNormalization::ZScore) {
  if (rec.length() < kWindow)
    throw DatasetError(rec.subject_id + ": recording shorter than one 288-sample window");
  SegmentSet out;
  detail::cut_windows(rec, test_segment_count(rec.length()), kTestStride, mode, out);
  return out;
}

}  // namespace respwave::data
