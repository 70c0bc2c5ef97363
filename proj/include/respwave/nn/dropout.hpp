#pragma once

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "respwave/errors.hpp"
#include "respwave/nn/feature_map.hpp"
#include "respwave/random.hpp"

namespace respwave::nn {

struct DropoutMask {
  double keep_probability = 1.0;
  std::vector<std::uint8_t> mask;  // 1 = keep
  std::uint64_t rng_seed = 0;
};

inline void check_keep_probability(double keep) {
  if (!(keep > 0.0 && keep <= 1.0))
    throw ParameterError("dropout keep probability must lie in (0, 1], got " + std::to_string(keep));
}

/// Bernoulli(keep) mask of `size` entries drawn from `rng`.
inline std::vector<std::uint8_t> draw_dropout_mask(std::size_t size, double keep, Rng& rng) {
  check_keep_probability(keep);
  std::vector<std::uint8_t> mask(size);
  for (auto& m : mask) m = rng.uniform() < keep ? 1 : 0;
  return mask;
}

inline DropoutMask make_dropout_mask(std::size_t size, double keep, std::uint64_t seed) {
  Rng rng(seed);
  return DropoutMask{keep, draw_dropout_mask(size, keep, rng), seed};
}

/// Inverted dropout: input * mask / keep when training, identity otherwise.
template <std::floating_point T>
BasicFeatureMap<T> dropout_apply(BasicFeatureMap<T> input, double keep, const std::vector<std::uint8_t>& mask,
                                 bool training) {
  check_keep_probability(keep);
  if (!training) return input;
  if (mask.size() != input.size()) throw ShapeError("dropout mask size does not match activation");
  const T scale = static_cast<T>(1.0 / keep);
  auto v = input.values();
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = mask[j] ? v[j] * scale : T{0};
  return input;
}

template <std::floating_point T>
BasicFeatureMap<T> dropout_apply(BasicFeatureMap<T> input, const DropoutMask& mask, bool training) {
  return dropout_apply(std::move(input), mask.keep_probability, mask.mask, training);
}

/// The training-mode map is linear and diagonal, so its backward is itself.
template <std::floating_point T>
BasicFeatureMap<T> dropout_backward(BasicFeatureMap<T> grad_out, double keep, const std::vector<std::uint8_t>& mask,
                                    bool training) {
  return dropout_apply(std::move(grad_out), keep, mask, training);
}

}  // namespace respwave::nn
