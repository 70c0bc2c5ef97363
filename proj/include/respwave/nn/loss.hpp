#pragma once

#include <concepts>

#include "respwave/errors.hpp"
#include "respwave/nn/feature_map.hpp"

namespace respwave::nn {

template <std::floating_point T>
struct LossResult {
  T loss;
  BasicFeatureMap<T> grad_prediction;
};

/// mean((p - t)^2) and its gradient 2 (p - t) / N.
template <std::floating_point T>
LossResult<T> mse_loss(const BasicFeatureMap<T>& prediction, const BasicFeatureMap<T>& target) {
  if (!prediction.same_shape(target))
    throw ShapeError("mse_loss: prediction " + shape_string(prediction) + " vs target " + shape_string(target));
  BasicFeatureMap<T> grad(prediction.channels(), prediction.length());
  const auto p = prediction.values();
  const auto t = target.values();
  auto g = grad.values();
  const T n = static_cast<T>(p.size());
  T sum{0};
  for (std::size_t j = 0; j < p.size(); ++j) {
    const T d = p[j] - t[j];
    sum += d * d;
    g[j] = T{2} * d / n;
  }
  return {sum / n, std::move(grad)};
}

}  // namespace respwave::nn
