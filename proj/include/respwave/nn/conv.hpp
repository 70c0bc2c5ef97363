#pragma once

// 1-D convolution and transposed convolution with stride 1 and symmetric zero
// padding. Convolution uses the cross-correlation convention (no kernel flip).
//
//   conv:       out[c,t] = b[c] + sum_{i,k} w[c,i,k] * xpad[i, t+k]
//   transposed: the adjoint of conv with the same padding, plus bias,
//               out[o,s] = b[o] + sum_{i,k} w[o,i,k] * x[i, s+p-k]
//
// Weights are always stored out x in x kernel, where "in"/"out" refer to the
// layer's own input and output.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"
#include "respwave/nn/feature_map.hpp"

namespace respwave::nn {

template <std::floating_point T>
struct BasicConvLayerParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;
  std::size_t padding = 0;
  std::vector<T> weights;  // out x in x kernel
  std::vector<T> bias;     // out

  BasicConvLayerParams() = default;
  BasicConvLayerParams(std::size_t in, std::size_t out, std::size_t kernel, std::size_t pad)
      : in_channels(in), out_channels(out), kernel_size(kernel), padding(pad),
        weights(in * out * kernel, T{0}), bias(out, T{0}) {
    if (in == 0 || out == 0 || kernel == 0) throw ShapeError("conv layer dimensions must be positive");
  }

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  T& weight(std::size_t o, std::size_t i, std::size_t k) noexcept {
    return weights[(o * in_channels + i) * kernel_size + k];
  }
  T weight(std::size_t o, std::size_t i, std::size_t k) const noexcept {
    return weights[(o * in_channels + i) * kernel_size + k];
  }
  std::span<const T> kernel(std::size_t o, std::size_t i) const noexcept {
    return {weights.data() + (o * in_channels + i) * kernel_size, kernel_size};
  }

  void validate() const {
    if (weights.size() != out_channels * in_channels * kernel_size)
      throw ShapeError("conv weights size " + std::to_string(weights.size()) + " != out*in*kernel");
    if (bias.size() != out_channels) throw ShapeError("conv bias size != out_channels");
  }

  friend bool operator==(const BasicConvLayerParams&, const BasicConvLayerParams&) = default;
};

using ConvLayerParams = BasicConvLayerParams<double>;

template <std::floating_point T>
struct BasicConvGrads {
  BasicFeatureMap<T> grad_input;
  std::vector<T> grad_weights;
  std::vector<T> grad_bias;
};

using ConvGrads = BasicConvGrads<double>;

/// Output length of a stride-1 convolution; throws when non-positive.
inline std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t padding) {
  const long long n = static_cast<long long>(length) + 2LL * static_cast<long long>(padding) -
                      static_cast<long long>(kernel) + 1;
  if (n <= 0)
    throw ShapeError("conv1d output length " + std::to_string(n) + " <= 0 (L=" + std::to_string(length) +
                     ", k=" + std::to_string(kernel) + ", p=" + std::to_string(padding) + ")");
  return static_cast<std::size_t>(n);
}

/// Output length of a stride-1 transposed convolution; throws when non-positive.
inline std::size_t conv_transpose1d_output_length(std::size_t length, std::size_t kernel, std::size_t padding) {
  const long long n = static_cast<long long>(length) - 1 + static_cast<long long>(kernel) -
                      2LL * static_cast<long long>(padding);
  if (n <= 0)
    throw ShapeError("conv_transpose1d output length " + std::to_string(n) + " <= 0 (L=" +
                     std::to_string(length) + ", k=" + std::to_string(kernel) +
                     ", p=" + std::to_string(padding) + ")");
  return static_cast<std::size_t>(n);
}

namespace detail {

// Inner kernels read up to kSlack elements past the last valid input sample of
// the final row; every buffer handed to them is allocated with that slack.
inline constexpr std::size_t kSlack = 64;

#if defined(__GNUC__)
#if defined(__AVX512F__)
inline constexpr std::size_t kSimdBytes = 64;
#else
inline constexpr std::size_t kSimdBytes = 32;
#endif

template <std::floating_point T>
struct Simd {
  static constexpr std::size_t lanes = kSimdBytes / sizeof(T);
  using type __attribute__((vector_size(kSimdBytes))) = T;
  static type load(const T* p) {
    type v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
};

template <std::floating_point T>
inline void add_lanes(T* out, const typename Simd<T>::type* acc, std::size_t count, std::size_t n) {
  T lane[4 * Simd<T>::lanes];
  std::memcpy(lane, acc, count * sizeof(*acc));
  for (std::size_t j = 0; j < n; ++j) out[j] += lane[j];
}

// Tiles keep their accumulators in named locals; an indexable accumulator array
// makes GCC spill them to the stack on every tap.

/// Four output rows x (4 * lanes) positions.
template <std::floating_point T>
inline void correlate_tile_4x4(const T* x, std::size_t x_stride, std::size_t rows_in, const T* w,
                               std::size_t w_out_stride, std::size_t w_in_stride, std::size_t nw, T* out,
                               std::size_t out_stride, std::size_t nout) {
  using S = Simd<T>;
  using V = typename S::type;
  constexpr std::size_t L = S::lanes;
  for (std::size_t t = 0; t < nout; t += 4 * L) {
    V a00{}, a01{}, a02{}, a03{}, a10{}, a11{}, a12{}, a13{};
    V a20{}, a21{}, a22{}, a23{}, a30{}, a31{}, a32{}, a33{};
    for (std::size_t i = 0; i < rows_in; ++i) {
      const T* xt = x + i * x_stride + t;
      const T* w0 = w + i * w_in_stride;
      const T* w1 = w0 + w_out_stride;
      const T* w2 = w1 + w_out_stride;
      const T* w3 = w2 + w_out_stride;
      for (std::size_t k = 0; k < nw; ++k) {
        const V x0 = S::load(xt + k);
        const V x1 = S::load(xt + k + L);
        const V x2 = S::load(xt + k + 2 * L);
        const V x3 = S::load(xt + k + 3 * L);
        T c = w0[k];
        a00 += c * x0;
        a01 += c * x1;
        a02 += c * x2;
        a03 += c * x3;
        c = w1[k];
        a10 += c * x0;
        a11 += c * x1;
        a12 += c * x2;
        a13 += c * x3;
        c = w2[k];
        a20 += c * x0;
        a21 += c * x1;
        a22 += c * x2;
        a23 += c * x3;
        c = w3[k];
        a30 += c * x0;
        a31 += c * x1;
        a32 += c * x2;
        a33 += c * x3;
      }
    }
    const std::size_t n = std::min(4 * L, nout - t);
    const V r0[4] = {a00, a01, a02, a03}, r1[4] = {a10, a11, a12, a13}, r2[4] = {a20, a21, a22, a23},
            r3[4] = {a30, a31, a32, a33};
    add_lanes(out + t, r0, 4, n);
    add_lanes(out + out_stride + t, r1, 4, n);
    add_lanes(out + 2 * out_stride + t, r2, 4, n);
    add_lanes(out + 3 * out_stride + t, r3, 4, n);
  }
}

/// One output row x (4 * lanes) positions.
template <std::floating_point T>
inline void correlate_tile_1x4(const T* x, std::size_t x_stride, std::size_t rows_in, const T* w,
                               std::size_t w_in_stride, std::size_t nw, T* out, std::size_t nout) {
  using S = Simd<T>;
  using V = typename S::type;
  constexpr std::size_t L = S::lanes;
  for (std::size_t t = 0; t < nout; t += 4 * L) {
    V a0{}, a1{}, a2{}, a3{};
    for (std::size_t i = 0; i < rows_in; ++i) {
      const T* xt = x + i * x_stride + t;
      const T* wi = w + i * w_in_stride;
      for (std::size_t k = 0; k < nw; ++k) {
        const T wk = wi[k];
        a0 += wk * S::load(xt + k);
        a1 += wk * S::load(xt + k + L);
        a2 += wk * S::load(xt + k + 2 * L);
        a3 += wk * S::load(xt + k + 3 * L);
      }
    }
    const V r[4] = {a0, a1, a2, a3};
    add_lanes(out + t, r, 4, std::min(4 * L, nout - t));
  }
}
#endif

/// out[r * out_stride + t] += sum_i sum_k w[r * w_out_stride + i * w_in_stride + k] * x[i * x_stride + t + k]
/// for r < rows_out, t < nout.  Row i of x must be readable for nout + nw - 1 + kSlack elements.
template <std::floating_point T>
inline void correlate_block_add(const T* x, std::size_t x_stride, std::size_t rows_in, const T* w,
                                std::size_t w_out_stride, std::size_t w_in_stride, std::size_t nw, T* out,
                                std::size_t out_stride, std::size_t rows_out, std::size_t nout) {
#if defined(__GNUC__)
  std::size_t r = 0;
  for (; r + 4 <= rows_out; r += 4)
    correlate_tile_4x4(x, x_stride, rows_in, w + r * w_out_stride, w_out_stride, w_in_stride, nw,
                       out + r * out_stride, out_stride, nout);
  for (; r < rows_out; ++r)
    correlate_tile_1x4(x, x_stride, rows_in, w + r * w_out_stride, w_in_stride, nw, out + r * out_stride, nout);
#else
  for (std::size_t r = 0; r < rows_out; ++r)
    for (std::size_t t = 0; t < nout; ++t) {
      T acc{0};
      for (std::size_t i = 0; i < rows_in; ++i)
        for (std::size_t k = 0; k < nw; ++k) acc += w[r * w_out_stride + i * w_in_stride + k] * x[i * x_stride + t + k];
      out[r * out_stride + t] += acc;
    }
#endif
}

/// Copies each channel of `m` into a row of width lead + m.length() + trail, zero filled.
template <std::floating_point T>
std::vector<T> zero_extend(const BasicFeatureMap<T>& m, std::size_t lead, std::size_t trail) {
  const std::size_t width = lead + m.length() + trail;
  std::vector<T> out(m.channels() * width + kSlack, T{0});
  for (std::size_t c = 0; c < m.channels(); ++c) {
    auto src = m.channel(c);
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(c * width + lead));
  }
  return out;
}

template <std::floating_point T>
std::vector<T> flipped_kernels(const BasicConvLayerParams<T>& layer) {
  std::vector<T> flipped(layer.weights.size());
  const std::size_t k = layer.kernel_size;
  for (std::size_t base = 0; base < layer.weights.size(); base += k)
    std::reverse_copy(layer.weights.begin() + static_cast<std::ptrdiff_t>(base),
                      layer.weights.begin() + static_cast<std::ptrdiff_t>(base + k),
                      flipped.begin() + static_cast<std::ptrdiff_t>(base));
  return flipped;
}

inline void require_channels(std::size_t got, std::size_t want, const char* op) {
  if (got != want)
    throw ShapeError(std::string(op) + ": input has " + std::to_string(got) + " channels, layer expects " +
                     std::to_string(want));
}

}  // namespace detail

template <std::floating_point T>
BasicFeatureMap<T> conv1d_forward(const BasicFeatureMap<T>& input, const BasicConvLayerParams<T>& layer) {
  layer.validate();
  detail::require_channels(input.channels(), layer.in_channels, "conv1d_forward");
  const std::size_t k = layer.kernel_size;
  const std::size_t p = layer.padding;
  const std::size_t lout = conv1d_output_length(input.length(), k, p);
  const std::size_t width = input.length() + 2 * p;
  const auto padded = detail::zero_extend(input, p, p);

  BasicFeatureMap<T> out(layer.out_channels, lout);
  for (std::size_t o = 0; o < layer.out_channels; ++o) std::fill_n(out.channel(o).data(), lout, layer.bias[o]);
  detail::correlate_block_add(padded.data(), width, layer.in_channels, layer.weights.data(), layer.in_channels * k, k,
                              k, out.values().data(), lout, layer.out_channels, lout);
  return out;
}

template <std::floating_point T>
BasicConvGrads<T> conv1d_backward(const BasicFeatureMap<T>& input, const BasicConvLayerParams<T>& layer,
                                  const BasicFeatureMap<T>& grad_out, bool input_grad = true) {
  layer.validate();
  detail::require_channels(input.channels(), layer.in_channels, "conv1d_backward");
  const std::size_t k = layer.kernel_size;
  const std::size_t p = layer.padding;
  const std::size_t lout = conv1d_output_length(input.length(), k, p);
  if (grad_out.channels() != layer.out_channels || grad_out.length() != lout)
    throw ShapeError("conv1d_backward: grad_out is " + shape_string(grad_out) + ", expected " +
                     shape_string(layer.out_channels, lout));

  BasicConvGrads<T> g{BasicFeatureMap<T>(input.channels(), input.length()),
                      std::vector<T>(layer.weights.size(), T{0}), std::vector<T>(layer.out_channels, T{0})};

  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    T s{0};
    for (T v : grad_out.channel(o)) s += v;
    g.grad_bias[o] = s;
  }

  // dL/dw[o,i,k] = sum_t g[o,t] * xpad[i,t+k]
  const std::size_t width = input.length() + 2 * p;
  const auto padded = detail::zero_extend(input, p, p);
  for (std::size_t i = 0; i < layer.in_channels; ++i)
    detail::correlate_block_add(padded.data() + i * width, width, 1, grad_out.values().data(), lout, 0, lout,
                                g.grad_weights.data() + i * k, layer.in_channels * k, layer.out_channels, k);

  // dL/dx[i,t] = sum_{o,k} w[o,i,k] * g[o, t+p-k]: correlation of the zero-extended
  // cotangent with the flipped kernel. Skipped (left zero) when the caller does not need it.
  if (!input_grad) return g;
  const std::size_t gwidth = lout + 2 * (k - 1);
  const auto gext = detail::zero_extend(grad_out, k - 1, k - 1);
  const auto flipped = detail::flipped_kernels(layer);
  detail::correlate_block_add(gext.data() + p, gwidth, layer.out_channels, flipped.data(), k, layer.in_channels * k,
                              k, g.grad_input.values().data(), input.length(), layer.in_channels, input.length());
  return g;
}

template <std::floating_point T>
BasicFeatureMap<T> conv_transpose1d_forward(const BasicFeatureMap<T>& input,
                                            const BasicConvLayerParams<T>& layer) {
  layer.validate();
  detail::require_channels(input.channels(), layer.in_channels, "conv_transpose1d_forward");
  const std::size_t k = layer.kernel_size;
  const std::size_t p = layer.padding;
  const std::size_t lout = conv_transpose1d_output_length(input.length(), k, p);
  const std::size_t width = input.length() + 2 * (k - 1);
  const auto ext = detail::zero_extend(input, k - 1, k - 1);
  const auto flipped = detail::flipped_kernels(layer);

  BasicFeatureMap<T> out(layer.out_channels, lout);
  for (std::size_t o = 0; o < layer.out_channels; ++o) std::fill_n(out.channel(o).data(), lout, layer.bias[o]);
  detail::correlate_block_add(ext.data() + p, width, layer.in_channels, flipped.data(), layer.in_channels * k, k, k,
                              out.values().data(), lout, layer.out_channels, lout);
  return out;
}

template <std::floating_point T>
BasicConvGrads<T> conv_transpose1d_backward(const BasicFeatureMap<T>& input, const BasicConvLayerParams<T>& layer,
                                            const BasicFeatureMap<T>& grad_out) {
  layer.validate();
  detail::require_channels(input.channels(), layer.in_channels, "conv_transpose1d_backward");
  const std::size_t k = layer.kernel_size;
  const std::size_t p = layer.padding;
  const std::size_t lout = conv_transpose1d_output_length(input.length(), k, p);
  if (grad_out.channels() != layer.out_channels || grad_out.length() != lout)
    throw ShapeError("conv_transpose1d_backward: grad_out is " + shape_string(grad_out) + ", expected " +
                     shape_string(layer.out_channels, lout));

  BasicConvGrads<T> g{BasicFeatureMap<T>(input.channels(), input.length()),
                      std::vector<T>(layer.weights.size(), T{0}), std::vector<T>(layer.out_channels, T{0})};

  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    T s{0};
    for (T v : grad_out.channel(o)) s += v;
    g.grad_bias[o] = s;
  }

  // Uncropped cotangent: grad_out placed at offset p in a row of length L - 1 + k.
  const std::size_t full = input.length() - 1 + k;
  std::vector<T> gfull(layer.out_channels * full + detail::kSlack, T{0});
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    auto src = grad_out.channel(o);
    std::copy(src.begin(), src.end(), gfull.begin() + static_cast<std::ptrdiff_t>(o * full + p));
  }

  // dL/dx[i,s] = sum_{o,k} w[o,i,k] * gfull[o, s+k]
  detail::correlate_block_add(gfull.data(), full, layer.out_channels, layer.weights.data(), k, layer.in_channels * k,
                              k, g.grad_input.values().data(), input.length(), layer.in_channels, input.length());

  // dL/dw[o,i,k] = sum_s x[i,s] * gfull[o, s+k]
  for (std::size_t o = 0; o < layer.out_channels; ++o)
    detail::correlate_block_add(gfull.data() + o * full, full, 1, input.values().data(), input.length(), 0,
                                input.length(), g.grad_weights.data() + o * layer.in_channels * k, k,
                                layer.in_channels, k);
  return g;
}

}  // namespace respwave::nn
