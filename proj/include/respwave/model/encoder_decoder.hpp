#pragma once

// Convolutional encoder-decoder mapping a 1 x 288 PPG window to a 1 x 288
// respiratory waveform:
//
//   conv(1->8, k150, p20) relu  dropout    288 -> 179
//   conv(8->8, k75,  p10) relu  dropout    179 -> 125
//   conv(8->8, k50,  p0)  sigm  dropout    125 -> 76   (latent 8 x 76)
//   convT(8->8, k50, p0)  sigm              76 -> 125
//   convT(8->8, k75, p10) relu             125 -> 179
//   convT(8->1, k150,p20) sigm             179 -> 288

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "respwave/errors.hpp"
#include "respwave/nn/activation.hpp"
#include "respwave/nn/adam.hpp"
#include "respwave/nn/conv.hpp"
#include "respwave/nn/dropout.hpp"
#include "respwave/nn/feature_map.hpp"
#include "respwave/nn/init.hpp"
#include "respwave/random.hpp"

namespace respwave::model {

using nn::Activation;
using nn::ConvLayerParams;
using nn::FeatureMap;

inline constexpr std::size_t kEncoderLayers = 3;
inline constexpr std::size_t kLayers = 6;

struct ModelConfig {
  std::size_t window = 288;
  std::size_t channels = 8;
  std::array<std::size_t, kEncoderLayers> kernels{150, 75, 50};
  std::array<std::size_t, kEncoderLayers> paddings{20, 10, 0};
  std::array<Activation, kEncoderLayers> encoder_activations{Activation::Relu, Activation::Relu, Activation::Sigmoid};
  std::array<Activation, kEncoderLayers> decoder_activations{Activation::Sigmoid, Activation::Relu,
                                                             Activation::Sigmoid};
  double keep_probability = 0.5;

  /// Small clone of the default architecture used for end-to-end gradient checks.
  static ModelConfig shrunken() {
    ModelConfig c;
    c.window = 32;
    c.kernels = {9, 5, 3};
    c.paddings = {2, 1, 0};
    return c;
  }

  /// Layer specs in forward order; decoder layer j mirrors encoder layer 2 - j.
  std::array<nn::LayerSpec, kLayers> layer_specs() const {
    std::array<nn::LayerSpec, kLayers> s{};
    for (std::size_t j = 0; j < kEncoderLayers; ++j) {
      s[j] = {j == 0 ? 1 : channels, channels, kernels[j], paddings[j], encoder_activations[j], false};
      const std::size_t m = kEncoderLayers - 1 - j;
      s[kEncoderLayers + j] = {channels, m == 0 ? 1 : channels, kernels[m], paddings[m], decoder_activations[j],
                               true};
    }
    return s;
  }

  /// Signal length entering each layer plus the final output length; throws
  /// BuildError naming the first stage whose shape equation fails.
  std::array<std::size_t, kLayers + 1> stage_lengths() const {
    if (channels == 0) throw BuildError("channel count must be positive");
    if (!(keep_probability > 0.0 && keep_probability <= 1.0))
      throw BuildError("dropout keep probability must lie in (0, 1]");
    const auto specs = layer_specs();
    std::array<std::size_t, kLayers + 1> lengths{};
    lengths[0] = window;
    for (std::size_t j = 0; j < kLayers; ++j) {
      const auto& sp = specs[j];
      try {
        if (sp.kernel_size == 0) throw ShapeError("kernel size must be positive");
        lengths[j + 1] = sp.transposed
                             ? nn::conv_transpose1d_output_length(lengths[j], sp.kernel_size, sp.padding)
                             : nn::conv1d_output_length(lengths[j], sp.kernel_size, sp.padding);
      } catch (const ShapeError& e) {
        throw BuildError(std::string(sp.transposed ? "decoder" : "encoder") + " stage " +
                         std::to_string(sp.transposed ? j - kEncoderLayers + 1 : j + 1) + ": " + e.what());
      }
    }
    if (lengths[kLayers] != window)
      throw BuildError("decoder stage 3: output length " + std::to_string(lengths[kLayers]) +
                       " does not match window " + std::to_string(window));
    return lengths;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderDecoderModel {
  ModelConfig config;
  std::array<ConvLayerParams, kLayers> layers;
  nn::AdamState adam;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }

  const ConvLayerParams& encoder(std::size_t j) const { return layers[j]; }
  const ConvLayerParams& decoder(std::size_t j) const { return layers[kEncoderLayers + j]; }
  static constexpr bool is_transposed(std::size_t layer) { return layer >= kEncoderLayers; }
  Activation activation(std::size_t layer) const {
    return layer < kEncoderLayers ? config.encoder_activations[layer]
                                  : config.decoder_activations[layer - kEncoderLayers];
  }

  /// Re-derives the shape plan and checks every layer against it.
  void validate() const {
    config.stage_lengths();
    const auto specs = config.layer_specs();
    for (std::size_t j = 0; j < kLayers; ++j) {
      const auto& l = layers[j];
      const auto& s = specs[j];
      l.validate();
      if (l.in_channels != s.in_channels || l.out_channels != s.out_channels || l.kernel_size != s.kernel_size ||
          l.padding != s.padding)
        throw BuildError("layer " + std::to_string(j + 1) + " dimensions do not match the configuration");
    }
    if (adam.size() != 0 && adam.size() != parameter_count())
      throw BuildError("Adam state size does not match parameter count");
  }
};

inline EncoderDecoderModel build_model(const ModelConfig& config, std::uint64_t rng_seed) {
  config.stage_lengths();
  EncoderDecoderModel m{config, {}, {}};
  const auto specs = config.layer_specs();
  for (std::size_t j = 0; j < kLayers; ++j) m.layers[j] = nn::init_params(specs[j], Rng::derive(rng_seed, j));
  m.adam = nn::AdamState(m.parameter_count());
  return m;
}

/// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  std::array<FeatureMap, kLayers> inputs;  // input to each conv
  std::array<FeatureMap, kLayers> pre;     // conv output
  std::array<FeatureMap, kLayers> post;    // activation output (before dropout)
  std::array<std::vector<std::uint8_t>, kEncoderLayers> masks;
  bool training = false;

  const FeatureMap& output() const { return post[kLayers - 1]; }
  const FeatureMap& latent() const { return post[kEncoderLayers - 1]; }
};

struct ForwardResult {
  FeatureMap output;
  FeatureMap latent;  // 8 x 76 bottleneck activation (before dropout)
};

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

using ModelGrads = std::array<LayerGrads, kLayers>;

namespace detail {

inline void check_window(const EncoderDecoderModel& m, const FeatureMap& x) {
  if (x.channels() != 1 || x.length() != m.config.window)
    throw ShapeError("model input must be 1x" + std::to_string(m.config.window) + ", got " + nn::shape_string(x));
}

}  // namespace detail

/// Forward pass keeping intermediates. `dropout_rng` is only consulted when training.
inline ForwardTrace forward_trace(const EncoderDecoderModel& m, const FeatureMap& x, bool training,
                                  Rng* dropout_rng) {
  detail::check_window(m, x);
  if (!x.all_finite()) throw ShapeError("model input contains non-finite values");
  if (training && dropout_rng == nullptr) throw ParameterError("training forward needs a dropout RNG");
  ForwardTrace tr;
  tr.training = training;
  FeatureMap h = x;
  for (std::size_t j = 0; j < kLayers; ++j) {
    tr.inputs[j] = std::move(h);
    tr.pre[j] = EncoderDecoderModel::is_transposed(j) ? nn::conv_transpose1d_forward(tr.inputs[j], m.layers[j])
                                       : nn::conv1d_forward(tr.inputs[j], m.layers[j]);
    tr.post[j] = nn::activate(m.activation(j), tr.pre[j]);
    h = tr.post[j];
    if (j < kEncoderLayers && training) {
      tr.masks[j] = nn::draw_dropout_mask(h.size(), m.config.keep_probability, *dropout_rng);
      h = nn::dropout_apply(std::move(h), m.config.keep_probability, tr.masks[j], true);
    }
  }
  return tr;
}

/// Gradients of a scalar loss with respect to every parameter, given dL/d(output).
inline ModelGrads backward(const EncoderDecoderModel& m, const ForwardTrace& tr, FeatureMap grad_output) {
  ModelGrads grads;
  FeatureMap g = std::move(grad_output);
  for (std::size_t jj = kLayers; jj-- > 0;) {
    if (jj < kEncoderLayers && tr.training)
      g = nn::dropout_backward(std::move(g), m.config.keep_probability, tr.masks[jj], true);
    g = nn::activate_backward(m.activation(jj), tr.pre[jj], tr.post[jj], std::move(g));
    auto cg = EncoderDecoderModel::is_transposed(jj) ? nn::conv_transpose1d_backward(tr.inputs[jj], m.layers[jj], g)
                                      : nn::conv1d_backward(tr.inputs[jj], m.layers[jj], g, jj > 0);
    grads[jj] = {std::move(cg.grad_weights), std::move(cg.grad_bias)};
    g = std::move(cg.grad_input);
  }
  return grads;
}

/// Inference (training = false) is deterministic and ignores `rng_seed`.
inline ForwardResult forward(const EncoderDecoderModel& m, const FeatureMap& x, bool training = false,
                             std::uint64_t rng_seed = 0) {
  Rng rng(rng_seed);
  auto tr = forward_trace(m, x, training, &rng);
  return {std::move(tr.post[kLayers - 1]), std::move(tr.post[kEncoderLayers - 1])};
}

inline FeatureMap predict(const EncoderDecoderModel& m, std::span<const double> window) {
  return forward(m, FeatureMap::row(window)).output;
}

/// Adam parameter groups in file order: per layer, weights then bias.
inline std::vector<nn::ParamGroup> param_groups(EncoderDecoderModel& m, const ModelGrads& g) {
  std::vector<nn::ParamGroup> groups;
  groups.reserve(2 * kLayers);
  for (std::size_t j = 0; j < kLayers; ++j) {
    groups.push_back({m.layers[j].weights, g[j].weights, static_cast<std::ptrdiff_t>(j)});
    groups.push_back({m.layers[j].bias, g[j].bias, static_cast<std::ptrdiff_t>(j)});
  }
  return groups;
}

}  // namespace respwave::model
