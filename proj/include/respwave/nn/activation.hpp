#pragma once

#include <cmath>
#include <concepts>
#include <stdexcept>
#include <string>
#include <string_view>

#include "respwave/errors.hpp"
#include "respwave/nn/feature_map.hpp"

namespace respwave::nn {

enum class Activation { Relu, Sigmoid };

inline std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "sigmoid"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ParameterError("unknown activation '" + std::string(s) + "'");
}

template <std::floating_point T>
inline T sigmoid_scalar(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

template <std::floating_point T>
BasicFeatureMap<T> relu(BasicFeatureMap<T> x) {
  for (T& v : x.values()) v = v > T{0} ? v : T{0};
  return x;
}

/// Cotangent through relu given the forward *input*; the derivative at 0 is 0.
template <std::floating_point T>
BasicFeatureMap<T> relu_backward(const BasicFeatureMap<T>& input, BasicFeatureMap<T> grad_out) {
  if (!input.same_shape(grad_out)) throw ShapeError("relu_backward: shape mismatch");
  auto in = input.values();
  auto g = grad_out.values();
  for (std::size_t j = 0; j < g.size(); ++j)
    if (!(in[j] > T{0})) g[j] = T{0};
  return grad_out;
}

template <std::floating_point T>
BasicFeatureMap<T> sigmoid(BasicFeatureMap<T> x) {
  for (T& v : x.values()) v = sigmoid_scalar(v);
  return x;
}

/// Cotangent through sigmoid given the forward *output* y: g * y * (1 - y).
template <std::floating_point T>
BasicFeatureMap<T> sigmoid_backward(const BasicFeatureMap<T>& output, BasicFeatureMap<T> grad_out) {
  if (!output.same_shape(grad_out)) throw ShapeError("sigmoid_backward: shape mismatch");
  auto y = output.values();
  auto g = grad_out.values();
  for (std::size_t j = 0; j < g.size(); ++j) g[j] *= y[j] * (T{1} - y[j]);
  return grad_out;
}

template <std::floating_point T>
BasicFeatureMap<T> activate(Activation a, BasicFeatureMap<T> x) {
  return a == Activation::Relu ? relu(std::move(x)) : sigmoid(std::move(x));
}

/// Backward through `a`; needs both the pre-activation and the activation output.
template <std::floating_point T>
BasicFeatureMap<T> activate_backward(Activation a, const BasicFeatureMap<T>& pre, const BasicFeatureMap<T>& post,
                                     BasicFeatureMap<T> grad_out) {
  return a == Activation::Relu ? relu_backward(pre, std::move(grad_out)) : sigmoid_backward(post, std::move(grad_out));
}

}  // namespace respwave::nn
