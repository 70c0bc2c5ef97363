#pragma once

// Which first-layer kernel is responsible for the strongest latent response,
// and which breathing rates each kernel ends up "owning".

#include <algorithm>
#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "respwave/data/recording.hpp"
#include "respwave/data/segment.hpp"
#include "respwave/errors.hpp"
#include "respwave/eval/report_io.hpp"
#include "respwave/model/encoder_decoder.hpp"

namespace respwave::interpret {

using model::EncoderDecoderModel;
using nn::FeatureMap;

/// Indices are 0-based here; CSV exports add 1.
struct MapArgmax {
  std::size_t channel = 0;
  std::size_t position = 0;
  double value = 0.0;
  friend bool operator==(const MapArgmax&, const MapArgmax&) = default;
};

/// Strict argmax; ties go to the lowest channel, then the lowest position.
inline MapArgmax map_argmax(const FeatureMap& m) {
  if (m.empty()) throw ShapeError("argmax of an empty map");
  MapArgmax best{0, 0, m(0, 0)};
  for (std::size_t c = 0; c < m.channels(); ++c)
    for (std::size_t t = 0; t < m.length(); ++t)
      if (m(c, t) > best.value) best = {c, t, m(c, t)};
  return best;
}

enum class AttributionMode {
  ContributionChain,  // bottleneck argmax traced back through layers 3 and 2
  Layer1Argmax,       // argmax taken directly over the layer-1 activations
};

inline AttributionMode parse_attribution_mode(std::string_view s) {
  if (s == "chain") return AttributionMode::ContributionChain;
  if (s == "layer1") return AttributionMode::Layer1Argmax;
  throw ParameterError("unknown attribution mode '" + std::string(s) + "' (expected chain or layer1)");
}

inline std::string_view to_string(AttributionMode m) {
  return m == AttributionMode::ContributionChain ? "chain" : "layer1";
}

namespace detail {

inline model::ForwardTrace inference_trace(const EncoderDecoderModel& m, std::span<const double> window) {
  return model::forward_trace(m, FeatureMap::row(window), false, nullptr);
}

/// Input channel with the largest summed contribution to conv unit (out, t).
inline std::size_t strongest_input(const nn::ConvLayerParams& layer, const FeatureMap& input, std::size_t out,
                                   std::size_t t) {
  std::size_t best = 0;
  double best_sum = 0.0;
  const auto p = static_cast<std::ptrdiff_t>(layer.padding);
  const auto len = static_cast<std::ptrdiff_t>(input.length());
  for (std::size_t i = 0; i < layer.in_channels; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < layer.kernel_size; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(t + k) - p;
      if (src >= 0 && src < len) s += layer.weight(out, i, k) * input(i, static_cast<std::size_t>(src));
    }
    if (i == 0 || s > best_sum) {
      best = i;
      best_sum = s;
    }
  }
  return best;
}

/// Position of the largest value of `channel` among the inputs read by conv unit t.
inline std::size_t strongest_position(const nn::ConvLayerParams& layer, const FeatureMap& input,
                                      std::size_t channel, std::size_t t) {
  const auto p = static_cast<std::ptrdiff_t>(layer.padding);
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(t) - p);
  const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(input.length()),
                                           static_cast<std::ptrdiff_t>(t + layer.kernel_size) - p);
  if (lo >= hi) throw ShapeError("receptive field lies entirely in the padding");
  auto best = static_cast<std::size_t>(lo);
  for (auto s = lo + 1; s < hi; ++s)
    if (input(channel, static_cast<std::size_t>(s)) > input(channel, best)) best = static_cast<std::size_t>(s);
  return best;
}

}  // namespace detail

inline MapArgmax latent_argmax(const EncoderDecoderModel& m, std::span<const double> window) {
  return map_argmax(detail::inference_trace(m, window).latent());
}

/// Contribution chain from a bottleneck unit back to a layer-1 kernel.
inline std::size_t trace_to_layer1(const EncoderDecoderModel& m, const model::ForwardTrace& tr,
                                   const MapArgmax& at) {
  const auto& l3 = m.layers[2];
  const auto& l2 = m.layers[1];
  const FeatureMap& act2 = tr.post[1];
  const FeatureMap& act1 = tr.post[0];
  const std::size_t c2 = detail::strongest_input(l3, act2, at.channel, at.position);
  const std::size_t t2 = detail::strongest_position(l3, act2, c2, at.position);
  return detail::strongest_input(l2, act1, c2, t2);
}

inline std::size_t trace_to_layer1(const EncoderDecoderModel& m, std::span<const double> window,
                                   const MapArgmax& at) {
  return trace_to_layer1(m, detail::inference_trace(m, window), at);
}

struct KernelAttribution {
  std::string subject;
  std::size_t window_start = 0;  // sample index
  MapArgmax latent;
  std::size_t kernel = 0;  // 0-based layer-1 kernel
  double rr_bpm = 0.0;
};

inline KernelAttribution attribute_window(const EncoderDecoderModel& m, std::span<const double> window,
                                          AttributionMode mode) {
  const auto tr = detail::inference_trace(m, window);
  KernelAttribution a;
  if (mode == AttributionMode::ContributionChain) {
    a.latent = map_argmax(tr.latent());
    a.kernel = trace_to_layer1(m, tr, a.latent);
  } else {
    a.latent = map_argmax(tr.post[0]);
    a.kernel = a.latent.channel;
  }
  return a;
}

struct KernelDistribution {
  std::vector<std::vector<double>> rr_by_kernel;  // one list per layer-1 kernel
  std::vector<KernelAttribution> rows;
  std::size_t skipped_unannotated = 0;
  std::size_t skipped_constant = 0;
};

/// Attributes every test window of every recording and files its annotated
/// reference rate under the responsible kernel.
inline KernelDistribution kernel_rr_distribution(const EncoderDecoderModel& m,
                                                 const std::vector<data::Recording>& recordings,
                                                 AttributionMode mode = AttributionMode::ContributionChain,
                                                 data::InputNormalization norm = data::InputNormalization::ZScore) {
  if (recordings.empty()) throw EvaluationError("empty distribution: no recordings");
  KernelDistribution d;
  d.rr_by_kernel.resize(m.layers[0].out_channels);
  for (const auto& rec : recordings) {
    const auto seg = data::segment_test(rec, norm);
    d.skipped_constant += seg.skipped;
    for (const auto& p : seg.pairs) {
      const double start_s = static_cast<double>(p.start_index) / rec.sample_rate;
      const auto rr = rec.mean_rr(start_s, start_s + static_cast<double>(data::kWindow) / rec.sample_rate);
      if (!rr) {
        ++d.skipped_unannotated;
        continue;
      }
      auto a = attribute_window(m, p.input, mode);
      a.subject = rec.subject_id;
      a.window_start = p.start_index;
      a.rr_bpm = *rr;
      d.rr_by_kernel[a.kernel].push_back(a.rr_bpm);
      d.rows.push_back(std::move(a));
    }
  }
  return d;
}

/// Centred moving average; output n averages x[n - width/2 .. n + width - width/2 - 1],
/// with the window shrinking to what exists near the edges.
inline std::vector<double> smooth_kernel(std::span<const double> x, std::size_t width = 30) {
  if (width == 0) throw ParameterError("smoothing width must be positive");
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto back = static_cast<std::ptrdiff_t>(width / 2);
  const auto fwd = static_cast<std::ptrdiff_t>(width) - back - 1;
  std::vector<double> out(x.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto lo = std::max<std::ptrdiff_t>(0, t - back);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, t + fwd);
    double s = 0.0;
    for (auto j = lo; j <= hi; ++j) s += x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(t)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// kernel_index,rr_bpm
inline void write_distribution_csv(const KernelDistribution& d, const std::filesystem::path& path) {
  using data::detail::format_number;
  std::string s = "kernel_index,rr_bpm\n";
  for (const auto& r : d.rows) s += std::to_string(r.kernel + 1) + "," + format_number(r.rr_bpm) + "\n";
  eval::write_text(path, s);
}

/// kernel_index,sample,weight,smoothed_weight for every layer-1 kernel.
inline void write_kernel_csv(const EncoderDecoderModel& m, const std::filesystem::path& path,
                             std::size_t width = 30) {
  using data::detail::format_number;
  const auto& l1 = m.layers[0];
  std::string s = "kernel_index,sample,weight,smoothed_weight\n";
  for (std::size_t c = 0; c < l1.out_channels; ++c) {
    const auto w = l1.kernel(c, 0);
    const auto sm = smooth_kernel(w, width);
    for (std::size_t k = 0; k < w.size(); ++k)
      s += std::to_string(c + 1) + "," + std::to_string(k) + "," + format_number(w[k]) + "," + format_number(sm[k]) +
           "\n";
  }
  eval::write_text(path, s);
}

}  // namespace respwave::interpret
