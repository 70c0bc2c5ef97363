#pragma once

// Neutral recording CSV:
//
//   subject_id,fs,resp_kind
//   <id>,<sample rate Hz>,<capnography|impedance>
//   ppg,resp
//   <ppg>,<resp>          one row per sample
//
// Optional sibling "<stem>.rr.csv" with header "t_sec,rr_bpm" carries
// reference respiratory-rate annotations.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "respwave/data/resample.hpp"
#include "respwave/errors.hpp"

namespace respwave::data {

inline constexpr double kSampleRate = 30.0;

enum class RespKind { Capnography, Impedance };

inline std::string_view to_string(RespKind k) { return k == RespKind::Capnography ? "capnography" : "impedance"; }

struct RrAnnotation {
  double t_sec;
  double rr_bpm;
  friend bool operator==(const RrAnnotation&, const RrAnnotation&) = default;
};

struct Recording {
  std::string subject_id;
  double sample_rate = kSampleRate;
  std::vector<double> ppg;
  std::vector<double> resp_ref;
  RespKind resp_kind = RespKind::Capnography;
  std::vector<RrAnnotation> rr_annotations;

  std::size_t length() const noexcept { return ppg.size(); }
  double duration_s() const noexcept { return static_cast<double>(ppg.size()) / sample_rate; }
  bool annotated() const noexcept { return !rr_annotations.empty(); }

  /// Mean annotated rate over [start_s, end_s), if any annotation falls inside.
  std::optional<double> mean_rr(double start_s, double end_s) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : rr_annotations)
      if (a.t_sec >= start_s && a.t_sec < end_s) {
        sum += a.rr_bpm;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(std::string_view field, std::size_t line, const char* what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw IngestionError(std::string("non-numeric ") + what + " value '" + std::string(field) + "'", line);
  if (!std::isfinite(v)) throw IngestionError(std::string("non-finite ") + what + " value", line);
  return v;
}

inline bool getline_trimmed(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void expect_header(std::string_view line, std::initializer_list<std::string_view> names, std::size_t lineno) {
  const auto fields = split_csv(line);
  std::size_t j = 0;
  for (auto name : names) {
    if (j >= fields.size()) throw IngestionError("missing column '" + std::string(name) + "'", lineno);
    if (fields[j] != name)
      throw IngestionError("expected column '" + std::string(name) + "', found '" + std::string(fields[j]) + "'",
                           lineno);
    ++j;
  }
}

}  // namespace detail

inline std::filesystem::path rr_path_for(const std::filesystem::path& recording_path) {
  auto p = recording_path;
  return p.replace_filename(recording_path.stem().string() + ".rr.csv");
}

inline std::vector<RrAnnotation> load_rr_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!detail::getline_trimmed(in, line)) throw IngestionError("empty annotation file " + path.string(), 1);
  detail::expect_header(line, {"t_sec", "rr_bpm"}, lineno);
  std::vector<RrAnnotation> out;
  while (detail::getline_trimmed(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() < 2) throw IngestionError("annotation row needs t_sec,rr_bpm", lineno);
    out.push_back({detail::parse_number(f[0], lineno, "t_sec"), detail::parse_number(f[1], lineno, "rr_bpm")});
  }
  return out;
}

/// Parses a recording CSV (and its optional .rr.csv sibling), resampling to 30 Hz.
inline Recording load_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::string line;
  if (!detail::getline_trimmed(in, line)) throw IngestionError("empty recording file " + path.string(), 1);
  detail::expect_header(line, {"subject_id", "fs", "resp_kind"}, 1);
  if (!detail::getline_trimmed(in, line)) throw IngestionError("missing metadata row", 2);
  const auto meta = detail::split_csv(line);
  if (meta.size() < 3) throw IngestionError("metadata row needs subject_id,fs,resp_kind", 2);

  Recording rec;
  rec.subject_id = std::string(meta[0]);
  if (rec.subject_id.empty()) throw IngestionError("empty subject_id", 2);
  const double fs = detail::parse_number(meta[1], 2, "fs");
  if (!(fs > 0.0)) throw IngestionError("fs must be positive", 2);
  if (meta[2] == "capnography")
    rec.resp_kind = RespKind::Capnography;
  else if (meta[2] == "impedance")
    rec.resp_kind = RespKind::Impedance;
  else
    throw IngestionError("unknown resp_kind '" + std::string(meta[2]) + "'", 2);

  if (!detail::getline_trimmed(in, line)) throw IngestionError("missing column header row", 3);
  detail::expect_header(line, {"ppg", "resp"}, 3);

  std::size_t lineno = 3;
  while (detail::getline_trimmed(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() < 2) throw IngestionError("row needs ppg,resp", lineno);
    rec.ppg.push_back(detail::parse_number(f[0], lineno, "ppg"));
    rec.resp_ref.push_back(detail::parse_number(f[1], lineno, "resp"));
  }
  if (rec.ppg.empty()) throw IngestionError("recording has no samples", lineno);

  if (fs != kSampleRate) {
    rec.ppg = resample_to_30hz(rec.ppg, fs);
    rec.resp_ref = resample_to_30hz(rec.resp_ref, fs);
  }
  rec.sample_rate = kSampleRate;

  const auto rr = rr_path_for(path);
  if (std::filesystem::exists(rr)) rec.rr_annotations = load_rr_annotations(rr);
  return rec;
}

inline void write_recording(const Recording& rec, const std::filesystem::path& path) {
  if (rec.ppg.size() != rec.resp_ref.size()) throw ParameterError("ppg and resp lengths differ");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "subject_id,fs,resp_kind\n"
      << rec.subject_id << ',' << detail::format_number(rec.sample_rate) << ',' << to_string(rec.resp_kind) << '\n'
      << "ppg,resp\n";
  for (std::size_t j = 0; j < rec.ppg.size(); ++j)
    out << detail::format_number(rec.ppg[j]) << ',' << detail::format_number(rec.resp_ref[j]) << '\n';
  if (!out) throw IngestionError("failed writing " + path.string());
}

inline void write_rr_annotations(const std::vector<RrAnnotation>& rr, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write " + path.string());
  out << "t_sec,rr_bpm\n";
  for (const auto& a : rr) out << detail::format_number(a.t_sec) << ',' << detail::format_number(a.rr_bpm) << '\n';
}

/// Every *.csv that is not an annotation file, sorted by filename.
inline std::vector<std::filesystem::path> list_recordings(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (e.path().extension() != ".csv" || name.ends_with(".rr.csv") || name == "manifest.csv") continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::vector<Recording> load_dataset(const std::filesystem::path& dir) {
  std::vector<Recording> recs;
  for (const auto& f : list_recordings(dir)) recs.push_back(load_recording(f));
  if (recs.empty()) throw DatasetError("no recordings found in " + dir.string());
  return recs;
}

}  // namespace respwave::data
