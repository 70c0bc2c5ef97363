#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "respwave/nn/conv.hpp"
#include "respwave/nn/feature_map.hpp"
#include "respwave/random.hpp"

namespace testing_support {

using respwave::Rng;
using respwave::nn::ConvLayerParams;
using respwave::nn::FeatureMap;

inline FeatureMap random_map(Rng& rng, std::size_t c, std::size_t l, double scale = 1.0) {
  FeatureMap m(c, l);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline ConvLayerParams random_layer(Rng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t p) {
  ConvLayerParams l(in, out, k, p);
  for (double& w : l.weights) w = rng.normal() * 0.5;
  for (double& b : l.bias) b = rng.normal() * 0.5;
  return l;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

/// Central differences of f with respect to every entry of `x` (perturbed in place).
inline std::vector<double> numeric_grad(std::span<double> x, const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = f();
    x[j] = keep - h;
    const double down = f();
    x[j] = keep;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    d += (a[j] - b[j]) * (a[j] - b[j]);
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? std::sqrt(d) : std::sqrt(d) / denom;
}

/// out[c,t] = b[c] + sum_i sum_k w[c,i,k] * in[i, t+k-p] (zero outside).
inline FeatureMap naive_conv(const FeatureMap& x, const ConvLayerParams& l) {
  const long L = static_cast<long>(x.length()), K = static_cast<long>(l.kernel_size),
             P = static_cast<long>(l.padding);
  const long out_len = L + 2 * P - K + 1;
  FeatureMap y(l.out_channels, static_cast<std::size_t>(out_len));
  for (std::size_t c = 0; c < l.out_channels; ++c)
    for (long t = 0; t < out_len; ++t) {
      double s = l.bias[c];
      for (std::size_t i = 0; i < l.in_channels; ++i)
        for (long k = 0; k < K; ++k) {
          const long src = t + k - P;
          if (src >= 0 && src < L) s += l.weight(c, i, static_cast<std::size_t>(k)) * x(i, static_cast<std::size_t>(src));
        }
      y(c, static_cast<std::size_t>(t)) = s;
    }
  return y;
}

/// Scatter form: every input sample adds w[o,i,k] * x[i,s] to output s + k - p.
inline FeatureMap naive_conv_transpose(const FeatureMap& x, const ConvLayerParams& l) {
  const long L = static_cast<long>(x.length()), K = static_cast<long>(l.kernel_size),
             P = static_cast<long>(l.padding);
  const long out_len = L - 1 + K - 2 * P;
  FeatureMap y(l.out_channels, static_cast<std::size_t>(out_len));
  for (std::size_t o = 0; o < l.out_channels; ++o)
    for (long t = 0; t < out_len; ++t) y(o, static_cast<std::size_t>(t)) = l.bias[o];
  for (std::size_t i = 0; i < l.in_channels; ++i)
    for (long s = 0; s < L; ++s)
      for (std::size_t o = 0; o < l.out_channels; ++o)
        for (long k = 0; k < K; ++k) {
          const long t = s + k - P;
          if (t >= 0 && t < out_len)
            y(o, static_cast<std::size_t>(t)) += l.weight(o, i, static_cast<std::size_t>(k)) * x(i, static_cast<std::size_t>(s));
        }
  return y;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("respwave_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
