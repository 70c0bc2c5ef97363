#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "respwave/data/segment.hpp"
#include "respwave/errors.hpp"
#include "respwave/model/encoder_decoder.hpp"
#include "respwave/nn/loss.hpp"
#include "respwave/random.hpp"

namespace respwave::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  nn::AdamHyper adam{};
  bool reset_adam = true;  // transfer retraining starts from fresh moments

  void validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (batch_size == 0) throw ParameterError("batch_size must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0))
      throw ParameterError("Adam hyperparameters out of range");
  }
};

struct TrainResult {
  std::vector<double> loss_history;  // mean training-mode MSE per epoch
  double wall_seconds = 0.0;
};

/// Called after every epoch with (epoch index, epoch loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Mean inference-mode MSE over `segments`.
inline double evaluate_mse(const model::EncoderDecoderModel& m, std::span<const data::SegmentPair> segments) {
  if (segments.empty()) throw ParameterError("evaluate_mse: no segments");
  double total = 0.0;
  for (const auto& s : segments) {
    const auto out = model::predict(m, s.input);
    total += nn::mse_loss(out, nn::FeatureMap::row(std::span<const double>(s.target))).loss;
  }
  return total / static_cast<double>(segments.size());
}

/// Mini-batch Adam on the MSE loss. Shuffles with Fisher-Yates every epoch;
/// shuffle order and dropout masks come from two streams derived from the seed,
/// so a run is reproducible bit for bit.
inline TrainResult train(model::EncoderDecoderModel& m, std::span<const data::SegmentPair> segments,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (segments.empty()) throw ParameterError("train: need at least one segment");
  m.validate();
  for (const auto& s : segments)
    if (s.input.size() != m.config.window || s.target.size() != m.config.window)
      throw ShapeError("train: segment length does not match the model window");

  const auto t0 = std::chrono::steady_clock::now();
  if (m.adam.size() != m.parameter_count()) m.adam = nn::AdamState(m.parameter_count(), cfg.adam);
  m.adam.hyper = cfg.adam;

  Rng shuffle_rng(Rng::derive(cfg.seed, 0x5EED0001));
  Rng dropout_rng(Rng::derive(cfg.seed, 0x5EED0002));
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<nn::FeatureMap> inputs, targets;
  inputs.reserve(segments.size());
  targets.reserve(segments.size());
  for (const auto& s : segments) {
    inputs.push_back(nn::FeatureMap::row(std::span<const double>(s.input)));
    targets.push_back(nn::FeatureMap::row(std::span<const double>(s.target)));
  }

  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  model::ModelGrads acc;
  for (std::size_t j = 0; j < model::kLayers; ++j) {
    acc[j].weights.assign(m.layers[j].weights.size(), 0.0);
    acc[j].bias.assign(m.layers[j].bias.size(), 0.0);
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (auto& g : acc) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const auto trace = model::forward_trace(m, inputs[idx], true, &dropout_rng);
        auto loss = nn::mse_loss(trace.output(), targets[idx]);
        if (!std::isfinite(loss.loss))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index));
        batch_loss += loss.loss;
        const auto g = model::backward(m, trace, std::move(loss.grad_prediction));
        for (std::size_t j = 0; j < model::kLayers; ++j) {
          for (std::size_t i = 0; i < g[j].weights.size(); ++i) acc[j].weights[i] += g[j].weights[i];
          for (std::size_t i = 0; i < g[j].bias.size(); ++i) acc[j].bias[i] += g[j].bias[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : acc) {
        for (double& v : g.weights) v *= inv;
        for (double& v : g.bias) v *= inv;
      }
      const auto groups = model::param_groups(m, acc);
      try {
        nn::adam_step(groups, m.adam, cfg.learning_rate);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_index),
                            e.layer());
      }
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(segments.size());
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace respwave::train
