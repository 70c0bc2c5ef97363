#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "respwave/data/recording.hpp"
#include "respwave/errors.hpp"
#include "respwave/eval/evaluate.hpp"

namespace respwave::eval {

inline nlohmann::ordered_json window_block_json(const WindowMetrics& m) {
  nlohmann::ordered_json j;
  j["window_s"] = m.window.duration_s();
  j["n_segments"] = m.window.n_segments;
  j["n_windows"] = m.rr.n_windows;
  j["rr_mae_bpm"] = m.rr.mae_median_windows;
  j["rr_mmae_bpm"] = m.rr.mmae_median_subjects;
  j["rr_abs_err_q1"] = m.rr.q1_windows;
  j["rr_abs_err_q3"] = m.rr.q3_windows;
  j["rr_subject_mean_abs_err"] = m.rr.subject_mean;
  j["waveform_mae_median"] = m.waveform_mae_median;
  j["waveform_mae_q1"] = m.waveform_mae_q1;
  j["waveform_mae_q3"] = m.waveform_mae_q3;
  j["waveform_mae_subject"] = m.waveform_mae_subject;
  j["duty_pearson_r"] = m.duty_pearson_r ? nlohmann::ordered_json(*m.duty_pearson_r) : nlohmann::ordered_json();
  j["duty_pearson_r_median_subject"] = m.duty_pearson_r_median_subject
                                           ? nlohmann::ordered_json(*m.duty_pearson_r_median_subject)
                                           : nlohmann::ordered_json();
  j["duty_abs_err_mean"] = m.duty_abs_err_mean;
  j["duty_abs_err_median"] = m.duty_abs_err_median;
  return j;
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["windows"] = nlohmann::ordered_json::array();
  for (const auto& b : r.blocks) j["windows"].push_back(window_block_json(b));
  j["warnings"] = r.warnings;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

/// subject,window_start_s,rr_est,rr_ref,abs_err
inline void write_window_trace_csv(const WindowMetrics& m, const std::filesystem::path& path) {
  using data::detail::format_number;
  std::string s = "subject,window_start_s,rr_est,rr_ref,abs_err\n";
  for (const auto& r : m.records)
    s += r.subject + "," + format_number(r.window_start_s) + "," + format_number(r.rr_est) + "," +
         format_number(r.rr_ref) + "," + format_number(r.abs_err) + "\n";
  write_text(path, s);
}

/// subject,t_sec,estimate,reference  (whole-recording fused outputs)
inline void write_fused_csv(const std::vector<SubjectEvaluation>& subjects, const std::filesystem::path& path,
                            double sample_rate = data::kSampleRate) {
  using data::detail::format_number;
  std::string s = "subject,t_sec,estimate,reference\n";
  for (const auto& e : subjects)
    for (std::size_t t = 0; t < e.fused.size(); ++t)
      s += e.subject + "," + format_number(static_cast<double>(t) / sample_rate) + "," + format_number(e.fused[t]) +
           "," + format_number(e.reference[t]) + "\n";
  write_text(path, s);
}

}  // namespace respwave::eval
