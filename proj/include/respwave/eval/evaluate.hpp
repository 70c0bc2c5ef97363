#pragma once

// Sliding-window evaluation of a waveform estimator over held-out recordings:
// fuse 1-s-shifted segment outputs, then score RR, waveform error and duty cycle.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "respwave/data/recording.hpp"
#include "respwave/data/segment.hpp"
#include "respwave/errors.hpp"
#include "respwave/eval/fusion.hpp"
#include "respwave/eval/metrics.hpp"
#include "respwave/eval/respiratory_rate.hpp"

namespace respwave::eval {

/// Maps one normalised 288-sample PPG window to a 288-sample respiratory estimate.
using WaveformEstimator = std::function<std::vector<double>(std::span<const double>)>;

struct EvalOptions {
  std::vector<EvaluationWindow> windows{EvaluationWindow::from_seconds(30.6), EvaluationWindow::from_seconds(60.6)};
  RrOptions rr{};
  data::InputNormalization input_normalization = data::InputNormalization::ZScore;
  std::size_t window_step = 1;  // in segments (1 s)
};

struct WindowRecord {
  std::string subject;
  double window_start_s = 0.0;
  double rr_est = 0.0;
  double rr_ref = 0.0;
  double abs_err = 0.0;
  bool rr_ref_annotated = false;
  double waveform_mae = 0.0;
  double duty_est = 0.0;
  double duty_ref = 0.0;
};

/// Per-subject output: segment predictions fused over the whole recording plus
/// window records for every requested window size (same order as EvalOptions::windows).
struct SubjectEvaluation {
  std::string subject;
  std::vector<double> fused;      // empty when a skipped segment breaks the tiling
  std::vector<double> reference;  // normalised reference over the same span
  std::vector<std::vector<WindowRecord>> per_window;
  std::vector<std::string> warnings;
};

inline SubjectEvaluation evaluate_subject(const data::Recording& rec, const WaveformEstimator& estimate,
                                          const EvalOptions& opt) {
  if (opt.windows.empty()) throw ParameterError("no evaluation windows requested");
  if (opt.window_step == 0) throw ParameterError("window step must be positive");
  SubjectEvaluation out;
  out.subject = rec.subject_id;
  const auto seg = data::segment_test(rec, opt.input_normalization);
  out.warnings = seg.warnings;

  const std::size_t n_slots = data::test_segment_count(rec.length());
  std::vector<std::optional<std::vector<double>>> outputs(n_slots);
  for (const auto& p : seg.pairs) {
    auto y = estimate(p.input);
    if (y.size() != data::kWindow) throw ShapeError("estimator returned " + std::to_string(y.size()) + " samples");
    outputs[p.start_index / data::kTestStride] = std::move(y);
  }
  const auto target = data::normalize_target(rec.resp_ref);
  const auto ref_span = [&](std::size_t start, std::size_t len) {
    return std::vector<double>(target.begin() + static_cast<std::ptrdiff_t>(start),
                               target.begin() + static_cast<std::ptrdiff_t>(start + len));
  };

  const auto fuse_range = [&](std::size_t first, std::size_t count) -> std::optional<std::vector<double>> {
    std::vector<std::vector<double>> segs;
    segs.reserve(count);
    for (std::size_t j = first; j < first + count; ++j) {
      if (!outputs[j]) return std::nullopt;
      segs.push_back(*outputs[j]);
    }
    return fuse_segments(segs, data::kTestStride);
  };

  if (auto all = fuse_range(0, n_slots)) {
    out.fused = std::move(*all);
    out.reference = ref_span(0, out.fused.size());
  }

  out.per_window.resize(opt.windows.size());
  for (std::size_t w = 0; w < opt.windows.size(); ++w) {
    const std::size_t n = opt.windows[w].n_segments;
    if (n > n_slots) {
      out.warnings.push_back(rec.subject_id + ": recording too short for a " +
                             std::to_string(opt.windows[w].duration_s()) + " s window");
      continue;
    }
    std::size_t gaps = 0;
    for (std::size_t first = 0; first + n <= n_slots; first += opt.window_step) {
      auto fused = fuse_range(first, n);
      if (!fused) {
        ++gaps;
        continue;
      }
      const std::size_t start = first * data::kTestStride;
      const auto ref = ref_span(start, fused->size());
      WindowRecord r;
      r.subject = rec.subject_id;
      r.window_start_s = static_cast<double>(start) / rec.sample_rate;
      r.rr_est = estimate_rr_fft(*fused, opt.rr);
      const double end_s = r.window_start_s + static_cast<double>(fused->size()) / rec.sample_rate;
      if (auto annotated = rec.mean_rr(r.window_start_s, end_s)) {
        r.rr_ref = *annotated;
        r.rr_ref_annotated = true;
      } else {
        r.rr_ref = estimate_rr_fft(ref, opt.rr);
      }
      r.abs_err = std::abs(r.rr_est - r.rr_ref);
      r.waveform_mae = waveform_mae(*fused, ref);
      r.duty_est = duty_cycle(*fused);
      r.duty_ref = duty_cycle(ref);
      out.per_window[w].push_back(std::move(r));
    }
    if (gaps > 0)
      out.warnings.push_back(rec.subject_id + ": " + std::to_string(gaps) +
                             " windows skipped because they contain a constant segment");
  }
  return out;
}

struct WindowMetrics {
  EvaluationWindow window;
  ErrorSummary rr;
  std::map<std::string, double> waveform_mae_subject;  // mean windowed MAE per subject
  double waveform_mae_median = 0.0;
  double waveform_mae_q1 = 0.0;
  double waveform_mae_q3 = 0.0;
  std::optional<double> duty_pearson_r;  // pooled over all windows
  std::optional<double> duty_pearson_r_median_subject;
  double duty_abs_err_mean = 0.0;
  double duty_abs_err_median = 0.0;
  std::vector<WindowRecord> records;
};

struct MetricsReport {
  std::string method;
  std::vector<WindowMetrics> blocks;
  std::vector<std::string> warnings;
};

inline WindowMetrics summarise_window(const EvaluationWindow& window, std::vector<WindowRecord> records,
                                      std::vector<std::string>& warnings) {
  WindowMetrics m;
  m.window = window;
  std::map<std::string, std::vector<double>> rr_err, wave, duty_e, duty_r;
  std::vector<double> all_e, all_r, duty_err;
  for (const auto& r : records) {
    rr_err[r.subject].push_back(r.abs_err);
    wave[r.subject].push_back(r.waveform_mae);
    duty_e[r.subject].push_back(r.duty_est);
    duty_r[r.subject].push_back(r.duty_ref);
    all_e.push_back(r.duty_est);
    all_r.push_back(r.duty_ref);
    duty_err.push_back(std::abs(r.duty_est - r.duty_ref));
  }
  m.rr = aggregate_metrics(rr_err);
  std::vector<double> wave_means;
  for (const auto& [s, v] : wave) {
    m.waveform_mae_subject[s] = mean(v);
    wave_means.push_back(m.waveform_mae_subject[s]);
  }
  m.waveform_mae_median = median(wave_means);
  m.waveform_mae_q1 = quantile(wave_means, 0.25);
  m.waveform_mae_q3 = quantile(wave_means, 0.75);
  m.duty_abs_err_mean = mean(duty_err);
  m.duty_abs_err_median = median(duty_err);
  const std::string tag = std::to_string(window.n_segments) + "-segment window";
  try {
    m.duty_pearson_r = pearson_corr(all_e, all_r);
  } catch (const EvaluationError& e) {
    warnings.push_back(tag + ": pooled duty-cycle correlation undefined (" + e.what() + ")");
  }
  std::vector<double> per_subject_r;
  for (const auto& [s, v] : duty_e) {
    try {
      per_subject_r.push_back(pearson_corr(v, duty_r[s]));
    } catch (const EvaluationError&) {
    }
  }
  if (!per_subject_r.empty()) m.duty_pearson_r_median_subject = median(per_subject_r);
  m.records = std::move(records);
  return m;
}

/// Builds the report from per-subject evaluations produced with the same options.
inline MetricsReport build_report(std::string method, const std::vector<SubjectEvaluation>& subjects,
                                  const EvalOptions& opt) {
  if (subjects.empty()) throw EvaluationError("empty report: no subjects evaluated");
  MetricsReport rep;
  rep.method = std::move(method);
  for (const auto& s : subjects) rep.warnings.insert(rep.warnings.end(), s.warnings.begin(), s.warnings.end());
  for (std::size_t w = 0; w < opt.windows.size(); ++w) {
    std::vector<WindowRecord> records;
    for (const auto& s : subjects)
      if (w < s.per_window.size()) records.insert(records.end(), s.per_window[w].begin(), s.per_window[w].end());
    if (records.empty()) {
      rep.warnings.push_back("no windows of " + std::to_string(opt.windows[w].duration_s()) + " s could be scored");
      continue;
    }
    rep.blocks.push_back(summarise_window(opt.windows[w], std::move(records), rep.warnings));
  }
  if (rep.blocks.empty()) throw EvaluationError("empty report: no window could be scored");
  return rep;
}

}  // namespace respwave::eval
