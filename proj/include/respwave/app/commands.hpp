#pragma once

// The five tool commands as library calls. The executable only parses flags.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "respwave/app/manifest.hpp"
#include "respwave/data/recording.hpp"
#include "respwave/data/segment.hpp"
#include "respwave/data/synth.hpp"
#include "respwave/errors.hpp"
#include "respwave/eval/evaluate.hpp"
#include "respwave/eval/pls.hpp"
#include "respwave/eval/report_io.hpp"
#include "respwave/interpret/attribution.hpp"
#include "respwave/model/weights_io.hpp"
#include "respwave/train/loso.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace respwave::app {

using data::detail::format_number;

/// Training allocates and frees a few hundred KB per sample; glibc's default
/// trim threshold hands that back to the kernel every time and the page faults
/// cost about a quarter of the run. Call once at process start.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  data::SynthConfig synth{};
  fs::path out;
};

inline Json synth_config_json(const data::SynthConfig& c) {
  Json j;
  j["n_subjects"] = c.n_subjects;
  j["duration_s"] = c.duration_s;
  j["heart_rate_bpm"] = {c.heart_rate_bpm.lo, c.heart_rate_bpm.hi};
  j["resp_rate_bpm"] = {c.resp_rate_bpm.lo, c.resp_rate_bpm.hi};
  j["duty_cycle"] = {c.duty_cycle.lo, c.duty_cycle.hi};
  j["intensity_depth"] = c.intensity_depth;
  j["amplitude_depth"] = c.amplitude_depth;
  j["frequency_depth"] = c.frequency_depth;
  j["noise_std"] = c.noise_std;
  j["edge_smoothing"] = c.edge_smoothing;
  j["id_prefix"] = c.id_prefix;
  j["seed"] = c.seed;
  return j;
}

/// Writes <id>.csv + <id>.rr.csv per subject, manifest.csv with the drawn
/// parameters and manifest.json with hashes. Output is a pure function of the config.
inline fs::path cmd_synth(const SynthArgs& a) {
  a.synth.validate();
  if (a.out.empty()) throw ParameterError("synth: output directory required");
  if (fs::exists(a.out) && !fs::is_empty(a.out))
    throw ParameterError("synth: output directory " + a.out.string() + " is not empty");
  fs::create_directories(a.out);

  std::vector<data::SynthSubject> draws;
  const auto recs = data::generate_synthetic(a.synth, &draws);
  Manifest man("synth", synth_config_json(a.synth), false);
  std::string table = "subject_id,rr_bpm,hr_bpm,duty_cycle\n";
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto csv = fs::path(recs[i].subject_id + ".csv");
    data::write_recording(recs[i], a.out / csv);
    data::write_rr_annotations(recs[i].rr_annotations, a.out / data::rr_path_for(csv));
    man.add_artifact(a.out, csv);
    man.add_artifact(a.out, data::rr_path_for(csv));
    table += recs[i].subject_id + "," + format_number(draws[i].resp_rate_bpm) + "," + format_number(draws[i].heart_rate_bpm) + "," +
             format_number(draws[i].duty_cycle) + "\n";
  }
  eval::write_text(a.out / "manifest.csv", table);
  man.add_artifact(a.out, "manifest.csv");
  man.write(a.out);
  return a.out;
}

// ---------------------------------------------------------------- folds.csv

struct FoldEntry {
  std::string held_out;  // empty for a model trained on every subject
  fs::path weights;      // absolute or relative to the run directory
  std::vector<std::string> train_subjects;
};

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t j = 0; j < v.size(); ++j) s += (j ? std::string(1, sep) : "") + v[j];
  return s;
}

inline std::vector<FoldEntry> read_folds_csv(const fs::path& run_dir) {
  const fs::path path = run_dir / "folds.csv";
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!data::detail::getline_trimmed(in, line)) throw IngestionError(path.string() + ": empty file", 1);
  data::detail::expect_header(line, {"fold", "held_out", "weights", "n_train_segments", "final_loss", "train_subjects"},
                              lineno);
  std::vector<FoldEntry> out;
  while (data::detail::getline_trimmed(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = data::detail::split_csv(line);
    if (f.size() != 6) throw IngestionError(path.string() + ": expected 6 fields", lineno);
    FoldEntry e;
    e.held_out = std::string(f[1]);
    e.weights = run_dir / std::string(f[2]);
    std::string_view subjects = f[5];
    while (!subjects.empty()) {
      const auto cut = subjects.find(';');
      e.train_subjects.emplace_back(subjects.substr(0, cut));
      if (cut == std::string_view::npos) break;
      subjects.remove_prefix(cut + 1);
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DatasetError(path.string() + ": no folds listed");
  return out;
}

/// A run directory yields its folds; a single file yields one entry, with the
/// training subjects taken from a sibling folds.csv when it lists the file.
inline std::vector<FoldEntry> resolve_weights(const fs::path& weights) {
  if (!fs::exists(weights)) throw DatasetError("weights not found: " + weights.string());
  if (fs::is_directory(weights)) return read_folds_csv(weights);
  FoldEntry single{"", weights, {}};
  if (fs::exists(weights.parent_path() / "folds.csv")) {
    for (auto& e : read_folds_csv(weights.parent_path()))
      if (fs::equivalent(e.weights, weights)) single.train_subjects = e.train_subjects;
  }
  return {single};
}

/// Which entry serves `subject`: its own held-out fold, else a shared model.
inline const FoldEntry& entry_for(const std::vector<FoldEntry>& entries, const std::string& subject, bool single_file) {
  if (single_file) return entries.front();
  for (const auto& e : entries)
    if (e.held_out == subject) return e;
  for (const auto& e : entries)
    if (e.held_out.empty()) return e;
  throw DatasetError("no model for subject '" + subject + "' in the weights directory");
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path data;
  fs::path out_root = "runs";
  std::string run_name;
  train::TrainConfig train{};
  data::InputNormalization input_normalization = data::InputNormalization::ZScore;
  std::size_t jobs = 1;
  bool loso = true;
  std::optional<fs::path> init_weights;
  bool save_adam = false;
  std::ostream* log = nullptr;
};

struct TrainOutcome {
  fs::path run_dir;
  std::vector<train::FoldResult> folds;
};

inline Json train_config_json(const TrainArgs& a) {
  Json j;
  j["data"] = a.data.string();
  j["learning_rate"] = a.train.learning_rate;
  j["batch_size"] = a.train.batch_size;
  j["epochs"] = a.train.epochs;
  j["seed"] = a.train.seed;
  j["adam"] = {{"beta1", a.train.adam.beta1}, {"beta2", a.train.adam.beta2}, {"epsilon", a.train.adam.epsilon}};
  j["reset_adam"] = a.train.reset_adam;
  j["input_normalization"] = data::to_string(a.input_normalization);
  j["loso"] = a.loso;
  j["init_weights"] = a.init_weights ? a.init_weights->string() : "";
  j["jobs"] = a.jobs;
  return j;
}

inline TrainOutcome cmd_train(const TrainArgs& a) {
  a.train.validate();
  const auto recordings = data::load_dataset(a.data);
  if (recordings.empty()) throw DatasetError("no recordings in " + a.data.string());
  train::check_unique_subjects(recordings);

  const model::ModelConfig mcfg{};
  std::optional<model::EncoderDecoderModel> init;
  if (a.init_weights) init = model::load_weights(*a.init_weights, mcfg);

  train::LosoOptions opt;
  opt.model = mcfg;
  opt.train = a.train;
  opt.input_normalization = a.input_normalization;
  opt.jobs = a.jobs;
  opt.init = init ? &*init : nullptr;
  if (a.log)
    opt.on_epoch = [log = a.log](std::size_t epoch, double loss) {
      if (epoch % 10 == 0) *log << "  epoch " << epoch << " loss " << loss << "\n";
    };

  TrainOutcome out;
  if (a.loso) {
    out.folds = train::loso_cv(recordings, opt);
  } else {
    train::FoldResult f;
    std::vector<data::SegmentPair> segments;
    for (const auto& r : recordings) {
      auto s = data::segment_training(r, a.input_normalization);
      segments.insert(segments.end(), s.pairs.begin(), s.pairs.end());
      f.warnings.insert(f.warnings.end(), s.warnings.begin(), s.warnings.end());
      f.train_subjects.push_back(r.subject_id);
    }
    f.n_train_segments = segments.size();
    f.model = init ? *init : model::build_model(mcfg, a.train.seed);
    const auto r = init ? train::transfer_retrain(f.model, segments, a.train, opt.on_epoch)
                        : train::train(f.model, segments, a.train, opt.on_epoch);
    f.loss_history = r.loss_history;
    f.wall_seconds = r.wall_seconds;
    out.folds.push_back(std::move(f));
  }

  out.run_dir = make_run_dir(a.out_root, "train", a.run_name);
  Manifest man("train", train_config_json(a));
  for (const auto& p : data::list_recordings(a.data)) man.add_input(p);
  if (a.init_weights) man.add_input(*a.init_weights);

  std::string folds_csv = "fold,held_out,weights,n_train_segments,final_loss,train_subjects\n";
  std::string loss_csv = "fold,held_out,epoch,loss\n";
  Json timing = Json::array();
  std::vector<std::string> warnings;
  for (std::size_t k = 0; k < out.folds.size(); ++k) {
    const auto& f = out.folds[k];
    const std::string file = f.held_out_subject.empty() ? "model.rsw" : "fold_" + f.held_out_subject + ".rsw";
    model::save_weights(f.model, out.run_dir / file, a.save_adam);
    man.add_artifact(out.run_dir, file);
    const double final_loss = f.loss_history.empty() ? 0.0 : f.loss_history.back();
    folds_csv += std::to_string(k) + "," + f.held_out_subject + "," + file + "," + std::to_string(f.n_train_segments) +
                 "," + format_number(final_loss) + "," + join(f.train_subjects, ';') + "\n";
    for (std::size_t e = 0; e < f.loss_history.size(); ++e)
      loss_csv += std::to_string(k) + "," + f.held_out_subject + "," + std::to_string(e) + "," +
                  format_number(f.loss_history[e]) + "\n";
    timing.push_back({{"fold", k}, {"held_out", f.held_out_subject}, {"wall_seconds", f.wall_seconds}});
    for (const auto& w : f.warnings)
      if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
  }
  eval::write_text(out.run_dir / "folds.csv", folds_csv);
  eval::write_text(out.run_dir / "loss.csv", loss_csv);
  man.add_artifact(out.run_dir, "folds.csv");
  man.add_artifact(out.run_dir, "loss.csv");
  man.json()["timing"] = timing;
  man.json()["warnings"] = warnings;
  man.write(out.run_dir);
  return out;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path weights;
  fs::path data;
  std::vector<double> windows_s{30.6, 60.6};
  fs::path out_root = "runs";
  std::string run_name;
  data::InputNormalization input_normalization = data::InputNormalization::ZScore;
  std::size_t jobs = 1;
  bool pls = true;
  std::size_t pls_components = 25;
};

struct EvalOutcome {
  fs::path run_dir;
  eval::MetricsReport model;
  std::optional<eval::MetricsReport> pls;
  std::vector<std::string> leakage;
  std::vector<eval::SubjectEvaluation> subjects;
};

inline eval::WaveformEstimator model_estimator(const model::EncoderDecoderModel& m) {
  return [&m](std::span<const double> x) { return model::predict(m, x).storage(); };
}

inline eval::WaveformEstimator pls_estimator(const eval::PLSModel& p) {
  return [&p](std::span<const double> x) { return eval::pls_predict(p, x); };
}

/// PLS fitted on every subject except `held_out` (index into recordings).
inline eval::PLSModel fit_pls_fold(const std::vector<data::Recording>& recordings, std::size_t held_out,
                                   data::InputNormalization norm, std::size_t components) {
  std::vector<data::SegmentPair> pairs;
  for (std::size_t s = 0; s < recordings.size(); ++s) {
    if (s == held_out) continue;
    auto seg = data::segment_training(recordings[s], norm);
    pairs.insert(pairs.end(), std::make_move_iterator(seg.pairs.begin()), std::make_move_iterator(seg.pairs.end()));
  }
  if (pairs.empty()) throw DatasetError("PLS fold has no training segments");
  std::vector<std::span<const double>> xs, ys;
  for (const auto& p : pairs) {
    xs.emplace_back(p.input);
    ys.emplace_back(p.target);
  }
  return eval::pls_train(eval::stack_rows(xs), eval::stack_rows(ys), {.n_components = components});
}

inline std::string window_tag(const eval::EvaluationWindow& w) { return format_number(w.duration_s()) + "s"; }

inline EvalOutcome cmd_eval(const EvalArgs& a) {
  eval::EvalOptions opt;
  opt.windows.clear();
  for (double s : a.windows_s) opt.windows.push_back(eval::EvaluationWindow::from_seconds(s));
  if (opt.windows.empty()) throw ParameterError("eval: no evaluation windows");
  opt.input_normalization = a.input_normalization;

  const auto entries = resolve_weights(a.weights);
  const bool single_file = !fs::is_directory(a.weights);
  const auto recordings = data::load_dataset(a.data);
  if (recordings.empty()) throw DatasetError("no recordings in " + a.data.string());
  train::check_unique_subjects(recordings);

  std::map<fs::path, model::EncoderDecoderModel> models;
  std::vector<const model::EncoderDecoderModel*> assigned(recordings.size());
  EvalOutcome out;
  for (std::size_t k = 0; k < recordings.size(); ++k) {
    const auto& e = entry_for(entries, recordings[k].subject_id, single_file);
    auto it = models.find(e.weights);
    if (it == models.end()) it = models.emplace(e.weights, model::load_weights(e.weights, model::ModelConfig{})).first;
    assigned[k] = &it->second;
    if (std::find(e.train_subjects.begin(), e.train_subjects.end(), recordings[k].subject_id) != e.train_subjects.end())
      out.leakage.push_back(recordings[k].subject_id);
  }

  out.subjects.resize(recordings.size());
  train::parallel_for(recordings.size(), a.jobs, [&](std::size_t k) {
    out.subjects[k] = eval::evaluate_subject(recordings[k], model_estimator(*assigned[k]), opt);
  });
  out.model = eval::build_report("autoencoder", out.subjects, opt);
  for (const auto& s : out.leakage)
    out.model.warnings.push_back("leakage: subject " + s + " was part of the model's training set");

  if (a.pls && recordings.size() >= 2) {
    std::vector<eval::SubjectEvaluation> pls_subjects(recordings.size());
    train::parallel_for(recordings.size(), a.jobs, [&](std::size_t k) {
      const auto p = fit_pls_fold(recordings, k, a.input_normalization, a.pls_components);
      pls_subjects[k] = eval::evaluate_subject(recordings[k], pls_estimator(p), opt);
      for (const auto& w : p.warnings) pls_subjects[k].warnings.push_back(recordings[k].subject_id + ": " + w);
    });
    out.pls = eval::build_report("pls", pls_subjects, opt);
  } else if (a.pls) {
    out.model.warnings.push_back("PLS baseline skipped: needs at least 2 subjects");
  }

  out.run_dir = make_run_dir(a.out_root, "eval", a.run_name);
  Json cfg;
  cfg["weights"] = a.weights.string();
  cfg["data"] = a.data.string();
  cfg["windows_s"] = a.windows_s;
  cfg["input_normalization"] = data::to_string(a.input_normalization);
  cfg["pls"] = a.pls;
  cfg["pls_components"] = a.pls_components;
  Manifest man("eval", cfg);
  for (const auto& [path, m] : models) man.add_input(path);

  Json metrics;
  metrics["windows_s"] = a.windows_s;
  metrics["model"] = eval::report_json(out.model);
  metrics["pls"] = out.pls ? eval::report_json(*out.pls) : Json();
  metrics["leakage"] = out.leakage;
  eval::write_text(out.run_dir / "metrics.json", metrics.dump(2) + "\n");
  man.add_artifact(out.run_dir, "metrics.json");
  for (const auto& b : out.model.blocks) {
    const auto name = "rr_windows_" + window_tag(b.window) + ".csv";
    eval::write_window_trace_csv(b, out.run_dir / name);
    man.add_artifact(out.run_dir, name);
  }
  if (out.pls)
    for (const auto& b : out.pls->blocks) {
      const auto name = "pls_rr_windows_" + window_tag(b.window) + ".csv";
      eval::write_window_trace_csv(b, out.run_dir / name);
      man.add_artifact(out.run_dir, name);
    }
  eval::write_fused_csv(out.subjects, out.run_dir / "fused.csv");
  man.add_artifact(out.run_dir, "fused.csv");
  man.write(out.run_dir);
  return out;
}

// ---------------------------------------------------------------- interpret

struct InterpretArgs {
  fs::path weights;
  fs::path data;
  interpret::AttributionMode mode = interpret::AttributionMode::ContributionChain;
  std::size_t smooth_width = 30;
  data::InputNormalization input_normalization = data::InputNormalization::ZScore;
  fs::path out_root = "runs";
  std::string run_name;
};

struct InterpretOutcome {
  fs::path run_dir;
  interpret::KernelDistribution distribution;
};

inline InterpretOutcome cmd_interpret(const InterpretArgs& a) {
  const auto entries = resolve_weights(a.weights);
  const bool single_file = !fs::is_directory(a.weights);
  const auto recordings = data::load_dataset(a.data);
  if (recordings.empty()) throw DatasetError("no recordings in " + a.data.string());

  std::map<fs::path, model::EncoderDecoderModel> models;
  InterpretOutcome out;
  auto& dist = out.distribution;
  for (const auto& rec : recordings) {
    const auto& e = entry_for(entries, rec.subject_id, single_file);
    auto it = models.find(e.weights);
    if (it == models.end()) it = models.emplace(e.weights, model::load_weights(e.weights, model::ModelConfig{})).first;
    auto d = interpret::kernel_rr_distribution(it->second, {rec}, a.mode, a.input_normalization);
    if (dist.rr_by_kernel.empty()) dist.rr_by_kernel.resize(d.rr_by_kernel.size());
    for (std::size_t c = 0; c < d.rr_by_kernel.size(); ++c)
      dist.rr_by_kernel[c].insert(dist.rr_by_kernel[c].end(), d.rr_by_kernel[c].begin(), d.rr_by_kernel[c].end());
    dist.rows.insert(dist.rows.end(), d.rows.begin(), d.rows.end());
    dist.skipped_unannotated += d.skipped_unannotated;
    dist.skipped_constant += d.skipped_constant;
  }
  if (dist.rows.empty())
    throw DatasetError("interpret: no annotated windows (" + std::to_string(dist.skipped_unannotated) +
                       " windows lack reference RR annotations)");

  out.run_dir = make_run_dir(a.out_root, "interpret", a.run_name);
  Json cfg;
  cfg["weights"] = a.weights.string();
  cfg["data"] = a.data.string();
  cfg["mode"] = interpret::to_string(a.mode);
  cfg["smooth_width"] = a.smooth_width;
  cfg["input_normalization"] = data::to_string(a.input_normalization);
  Manifest man("interpret", cfg);

  interpret::write_distribution_csv(dist, out.run_dir / "kernel_rr.csv");
  man.add_artifact(out.run_dir, "kernel_rr.csv");
  for (const auto& [path, m] : models) {
    man.add_input(path);
    const auto name = "kernels_" + path.stem().string() + ".csv";
    interpret::write_kernel_csv(m, out.run_dir / name, a.smooth_width);
    man.add_artifact(out.run_dir, name);
  }
  Json summary;
  summary["mode"] = interpret::to_string(a.mode);
  summary["attributed_windows"] = dist.rows.size();
  summary["skipped_unannotated"] = dist.skipped_unannotated;
  summary["skipped_constant"] = dist.skipped_constant;
  summary["kernels"] = Json::array();
  for (std::size_t c = 0; c < dist.rr_by_kernel.size(); ++c) {
    const auto& v = dist.rr_by_kernel[c];
    summary["kernels"].push_back({{"kernel_index", c + 1},
                                  {"count", v.size()},
                                  {"median_rr_bpm", v.empty() ? Json() : Json(eval::median(v))}});
  }
  eval::write_text(out.run_dir / "summary.json", summary.dump(2) + "\n");
  man.add_artifact(out.run_dir, "summary.json");
  man.write(out.run_dir);
  return out;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::optional<fs::path> weights;
  std::size_t iterations = 10000;
  std::uint64_t seed = 1;
  fs::path out_root = "runs";
  std::string run_name;
  bool write = true;
};

struct BenchReport {
  std::size_t iterations = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double windows_per_s = 0.0;
  double waveform_hours_per_s = 0.0;
  fs::path run_dir;
};

inline BenchReport cmd_bench(const BenchArgs& a) {
  if (a.iterations == 0) throw ParameterError("bench: iterations must be positive");
  const auto m = a.weights ? model::load_weights(*a.weights, model::ModelConfig{})
                           : model::build_model(model::ModelConfig{}, a.seed);
  Rng rng(a.seed);
  constexpr std::size_t kPool = 64;
  std::vector<nn::FeatureMap> inputs;
  for (std::size_t j = 0; j < kPool; ++j) {
    std::vector<double> x(m.config.window);
    for (double& v : x) v = rng.normal();
    inputs.push_back(nn::FeatureMap::row(data::normalize_input(x)));
  }
  double sink = 0.0;
  for (std::size_t j = 0; j < 100; ++j) sink += model::forward(m, inputs[j % kPool]).output(0, 0);

  using clock = std::chrono::steady_clock;
  std::vector<double> lat(a.iterations);
  const auto t0 = clock::now();
  for (std::size_t j = 0; j < a.iterations; ++j) {
    const auto s = clock::now();
    sink += model::forward(m, inputs[j % kPool]).output(0, 0);
    lat[j] = std::chrono::duration<double, std::milli>(clock::now() - s).count();
  }
  const double total = std::chrono::duration<double>(clock::now() - t0).count();
  if (!std::isfinite(sink)) throw TrainingError("bench produced non-finite outputs");

  BenchReport r;
  r.iterations = a.iterations;
  r.mean_ms = eval::mean(lat);
  r.p95_ms = eval::quantile(lat, 0.95);
  r.windows_per_s = static_cast<double>(a.iterations) / total;
  r.waveform_hours_per_s = r.windows_per_s * eval::kSegmentSeconds / 3600.0;
  if (a.write) {
    r.run_dir = make_run_dir(a.out_root, "bench", a.run_name);
    Json cfg;
    cfg["weights"] = a.weights ? a.weights->string() : "";
    cfg["iterations"] = a.iterations;
    cfg["seed"] = a.seed;
    Manifest man("bench", cfg);
    Json j;
    j["iterations"] = r.iterations;
    j["mean_ms"] = r.mean_ms;
    j["p95_ms"] = r.p95_ms;
    j["throughput_windows_per_s"] = r.windows_per_s;
    j["waveform_hours_per_s"] = r.waveform_hours_per_s;
    eval::write_text(r.run_dir / "bench.json", j.dump(2) + "\n");
    man.add_artifact(r.run_dir, "bench.json");
    man.write(r.run_dir);
  }
  return r;
}

}  // namespace respwave::app
