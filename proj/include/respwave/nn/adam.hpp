#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::nn {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for a flat parameter vector; groups passed to adam_step are
/// laid out back to back in the order given.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamHyper h = {})
      : first_moment(n, 0.0), second_moment(n, 0.0), hyper(h) {}

  std::size_t size() const noexcept { return first_moment.size(); }
  void reset() {
    std::fill(first_moment.begin(), first_moment.end(), 0.0);
    std::fill(second_moment.begin(), second_moment.end(), 0.0);
    step_count = 0;
  }
};

/// One parameter group (typically a layer's weights or bias) with its gradient.
struct ParamGroup {
  std::span<double> values;
  std::span<const double> grads;
  std::ptrdiff_t layer = -1;  // reported in TrainingError
};

/// Bias-corrected Adam update over all groups; increments the step count once.
/// Gradients are checked for finiteness before any parameter is touched.
inline void adam_step(std::span<const ParamGroup> groups, AdamState& state, double learning_rate) {
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.values.size() != g.grads.size()) throw ShapeError("adam_step: parameter/gradient size mismatch");
    for (double v : g.grads)
      if (!std::isfinite(v))
        throw TrainingError("non-finite gradient in layer " + std::to_string(g.layer), g.layer);
    total += g.values.size();
  }
  if (total != state.size())
    throw ShapeError("adam_step: state holds " + std::to_string(state.size()) + " moments for " +
                     std::to_string(total) + " parameters");

  ++state.step_count;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);

  std::size_t offset = 0;
  for (const auto& g : groups) {
    double* m = state.first_moment.data() + offset;
    double* v = state.second_moment.data() + offset;
    for (std::size_t j = 0; j < g.values.size(); ++j) {
      const double grad = g.grads[j];
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * grad;
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * grad * grad;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      g.values[j] -= learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
    }
    offset += g.values.size();
  }
}

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double learning_rate) {
  const ParamGroup group{params, grads, 0};
  adam_step(std::span<const ParamGroup>(&group, 1), state, learning_rate);
}

}  // namespace respwave::nn
