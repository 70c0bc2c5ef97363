#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "respwave/data/recording.hpp"
#include "respwave/data/segment.hpp"
#include "respwave/errors.hpp"
#include "respwave/model/encoder_decoder.hpp"
#include "respwave/train/trainer.hpp"

namespace respwave::train {

struct FoldResult {
  std::string held_out_subject;
  std::size_t fold_index = 0;
  model::EncoderDecoderModel model;
  std::vector<double> loss_history;
  std::vector<std::string> train_subjects;
  std::size_t n_train_segments = 0;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

struct LosoOptions {
  model::ModelConfig model{};
  TrainConfig train{};
  data::InputNormalization input_normalization = data::InputNormalization::ZScore;
  std::size_t jobs = 1;
  // Starting point for every fold; a fresh model is built from the seed when null.
  const model::EncoderDecoderModel* init = nullptr;
  EpochCallback on_epoch{};  // only invoked when jobs == 1
};

inline void check_unique_subjects(const std::vector<data::Recording>& recordings) {
  std::set<std::string> seen;
  for (const auto& r : recordings)
    if (!seen.insert(r.subject_id).second) throw DatasetError("duplicate subject id '" + r.subject_id + "'");
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& body) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Continue training a pretrained model on new segments. Shapes must match
/// `expected`; Adam moments are cleared unless cfg.reset_adam is false.
inline TrainResult transfer_retrain(model::EncoderDecoderModel& m, std::span<const data::SegmentPair> segments,
                                    const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  m.validate();
  if (cfg.reset_adam || m.adam.size() != m.parameter_count()) m.adam = nn::AdamState(m.parameter_count(), cfg.adam);
  return train(m, segments, cfg, on_epoch);
}

/// One fold per subject: fold k trains on every other subject's training
/// segments and holds subject k out. Fold k's training stream is seeded with
/// derive(seed, k) so results do not depend on `jobs`.
inline std::vector<FoldResult> loso_cv(const std::vector<data::Recording>& recordings, const LosoOptions& opt) {
  if (recordings.size() < 2) throw DatasetError("leave-one-subject-out needs at least 2 subjects");
  check_unique_subjects(recordings);
  opt.train.validate();
  if (opt.init) {
    opt.init->validate();
    if (!(opt.init->config == opt.model))
      throw LoadError(LoadError::Kind::ShapeMismatch, "pretrained model configuration does not match");
  }

  std::vector<data::SegmentSet> per_subject;
  per_subject.reserve(recordings.size());
  for (const auto& r : recordings) {
    try {
      per_subject.push_back(data::segment_training(r, opt.input_normalization));
    } catch (const Error& e) {
      throw DatasetError(r.subject_id + ": " + e.what());
    }
  }

  std::vector<FoldResult> folds(recordings.size());
  parallel_for(recordings.size(), opt.jobs, [&](std::size_t k) {
    FoldResult& f = folds[k];
    f.fold_index = k;
    f.held_out_subject = recordings[k].subject_id;
    std::vector<data::SegmentPair> segments;
    for (std::size_t s = 0; s < recordings.size(); ++s) {
      if (s == k) continue;
      f.train_subjects.push_back(recordings[s].subject_id);
      segments.insert(segments.end(), per_subject[s].pairs.begin(), per_subject[s].pairs.end());
      f.warnings.insert(f.warnings.end(), per_subject[s].warnings.begin(), per_subject[s].warnings.end());
    }
    if (segments.empty()) throw DatasetError("fold " + f.held_out_subject + ": no training segments");
    f.n_train_segments = segments.size();

    TrainConfig cfg = opt.train;
    cfg.seed = Rng::derive(opt.train.seed, k);
    const EpochCallback cb = opt.jobs == 1 ? opt.on_epoch : EpochCallback{};
    TrainResult r;
    if (opt.init) {
      f.model = *opt.init;
      r = transfer_retrain(f.model, segments, cfg, cb);
    } else {
      f.model = model::build_model(opt.model, opt.train.seed);
      r = train(f.model, segments, cfg, cb);
    }
    f.loss_history = std::move(r.loss_history);
    f.wall_seconds = r.wall_seconds;
  });
  return folds;
}

}  // namespace respwave::train
