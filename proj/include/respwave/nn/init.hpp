#pragma once

#include <cmath>
#include <cstdint>

#include "respwave/nn/activation.hpp"
#include "respwave/nn/conv.hpp"
#include "respwave/random.hpp"

namespace respwave::nn {

struct LayerSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::size_t padding = 0;
  Activation activation = Activation::Relu;  // activation that follows the layer
  bool transposed = false;
};

/// fan_in = in * kernel, fan_out = out * kernel for both layer kinds.
inline double init_bound(const LayerSpec& spec) {
  const double fan_in = static_cast<double>(spec.in_channels * spec.kernel_size);
  const double fan_out = static_cast<double>(spec.out_channels * spec.kernel_size);
  return spec.activation == Activation::Relu ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
}

/// He-uniform weights ahead of ReLU, Xavier-uniform ahead of sigmoid; zero bias.
inline ConvLayerParams init_params(const LayerSpec& spec, std::uint64_t rng_seed) {
  ConvLayerParams layer(spec.in_channels, spec.out_channels, spec.kernel_size, spec.padding);
  const double bound = init_bound(spec);
  Rng rng(rng_seed);
  for (double& w : layer.weights) w = rng.uniform(-bound, bound);
  return layer;
}

}  // namespace respwave::nn
