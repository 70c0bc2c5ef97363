#pragma once

// Weight file layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       8     magic "RSPCDC01"
//   8       4     u32 layer count (6)
//   12      4     u32 window length
//   16      4     f32 dropout keep probability
//   20      4     u32 flags (bit 0: Adam block present)
//   24      144   6 x { u32 kind (0 conv, 1 transposed), u32 in, u32 out,
//                       u32 kernel, u32 padding, u32 activation (0 relu, 1 sigmoid) }
//   168     4*N   f32 parameters, per layer: weights (out x in x kernel) then bias
//   [Adam block]  u64 step count, f64 beta1, f64 beta2, f64 epsilon,
//                 f32 first moments (N), f32 second moments (N)
//
// For the default architecture N = 18,441, so a file without Adam state is
// 168 + 73,764 = 73,932 bytes.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "respwave/errors.hpp"
#include "respwave/model/encoder_decoder.hpp"

namespace respwave::model {

inline constexpr std::string_view kWeightMagic = "RSPCDC01";
inline constexpr std::size_t kWeightHeaderBytes = 8 + 16 + kLayers * 24;

namespace detail {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> data) : buf_(std::move(data)) {}
  std::size_t remaining() const { return buf_.size() - pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw LoadError(LoadError::Kind::Truncated, std::string("truncated weight file while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * b);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * b);
    return v;
  }
  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string_view v(buf_.data() + pos_, n);
    pos_ += n;
    return v;
  }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Encodes the model (and optionally its Adam state) into the weight-file byte layout.
inline std::vector<char> encode_weights(const EncoderDecoderModel& m, bool include_adam = false) {
  m.validate();
  detail::ByteWriter w;
  w.bytes(kWeightMagic);
  w.u32(static_cast<std::uint32_t>(kLayers));
  w.u32(static_cast<std::uint32_t>(m.config.window));
  w.f32(m.config.keep_probability);
  const bool adam = include_adam && m.adam.size() == m.parameter_count();
  w.u32(adam ? 1u : 0u);
  for (std::size_t j = 0; j < kLayers; ++j) {
    const auto& l = m.layers[j];
    w.u32(EncoderDecoderModel::is_transposed(j) ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(l.in_channels));
    w.u32(static_cast<std::uint32_t>(l.out_channels));
    w.u32(static_cast<std::uint32_t>(l.kernel_size));
    w.u32(static_cast<std::uint32_t>(l.padding));
    w.u32(m.activation(j) == Activation::Relu ? 0u : 1u);
  }
  for (const auto& l : m.layers) {
    for (double v : l.weights) w.f32(v);
    for (double v : l.bias) w.f32(v);
  }
  if (adam) {
    w.u64(m.adam.step_count);
    w.f64(m.adam.hyper.beta1);
    w.f64(m.adam.hyper.beta2);
    w.f64(m.adam.hyper.epsilon);
    for (double v : m.adam.first_moment) w.f32(v);
    for (double v : m.adam.second_moment) w.f32(v);
  }
  return w.data();
}

/// Decodes a weight file image. When `expected` is given, the stored
/// architecture must equal it.
inline EncoderDecoderModel decode_weights(std::vector<char> bytes, const std::optional<ModelConfig>& expected = {}) {
  detail::ByteReader r(std::move(bytes));
  if (r.remaining() < kWeightMagic.size() || r.bytes(kWeightMagic.size(), "magic") != kWeightMagic)
    throw LoadError(LoadError::Kind::BadMagic, "bad magic: not a respwave weight file");

  const std::uint32_t layer_count = r.u32("layer count");
  if (layer_count != kLayers)
    throw LoadError(LoadError::Kind::ShapeMismatch, "weight file has " + std::to_string(layer_count) + " layers");
  ModelConfig cfg;
  cfg.window = r.u32("window");
  cfg.keep_probability = r.f32("keep probability");
  const std::uint32_t flags = r.u32("flags");

  std::array<std::array<std::uint32_t, 6>, kLayers> dims{};
  for (auto& d : dims)
    for (auto& v : d) v = r.u32("layer header");

  auto mismatch = [](const std::string& msg) { return LoadError(LoadError::Kind::ShapeMismatch, msg); };
  cfg.channels = dims[0][2];
  for (std::size_t j = 0; j < kLayers; ++j) {
    const bool transposed = EncoderDecoderModel::is_transposed(j);
    if (dims[j][0] != (transposed ? 1u : 0u)) throw mismatch("layer " + std::to_string(j + 1) + " has the wrong kind");
    if (dims[j][5] > 1) throw mismatch("layer " + std::to_string(j + 1) + " has an unknown activation");
    const Activation act = dims[j][5] == 0 ? Activation::Relu : Activation::Sigmoid;
    if (j < kEncoderLayers) {
      cfg.kernels[j] = dims[j][3];
      cfg.paddings[j] = dims[j][4];
      cfg.encoder_activations[j] = act;
    } else {
      cfg.decoder_activations[j - kEncoderLayers] = act;
    }
  }

  EncoderDecoderModel m{cfg, {}, {}};
  try {
    cfg.stage_lengths();
    const auto specs = cfg.layer_specs();
    for (std::size_t j = 0; j < kLayers; ++j) {
      const auto& s = specs[j];
      if (dims[j][1] != s.in_channels || dims[j][2] != s.out_channels || dims[j][3] != s.kernel_size ||
          dims[j][4] != s.padding)
        throw mismatch("layer " + std::to_string(j + 1) + " dimensions break the mirrored architecture");
      m.layers[j] = ConvLayerParams(s.in_channels, s.out_channels, s.kernel_size, s.padding);
    }
  } catch (const BuildError& e) {
    throw mismatch(std::string("stored shape plan is invalid: ") + e.what());
  }
  if (expected && !(*expected == cfg)) throw mismatch("stored architecture differs from the expected configuration");

  for (auto& l : m.layers) {
    r.need(4 * l.parameter_count(), "parameters");
    for (double& v : l.weights) v = r.f32("weights");
    for (double& v : l.bias) v = r.f32("bias");
  }
  const std::size_t n = m.parameter_count();
  m.adam = nn::AdamState(n);
  if (flags & 1u) {
    m.adam.step_count = r.u64("adam step");
    m.adam.hyper.beta1 = r.f64("adam beta1");
    m.adam.hyper.beta2 = r.f64("adam beta2");
    m.adam.hyper.epsilon = r.f64("adam epsilon");
    r.need(8 * n, "adam moments");
    for (double& v : m.adam.first_moment) v = r.f32("adam m");
    for (double& v : m.adam.second_moment) v = r.f32("adam v");
  }
  if (r.remaining() != 0)
    throw mismatch(std::to_string(r.remaining()) + " unexpected trailing bytes in weight file");
  m.validate();
  return m;
}

inline void save_weights(const EncoderDecoderModel& m, const std::filesystem::path& path, bool include_adam = false) {
  const auto bytes = encode_weights(m, include_adam);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(LoadError::Kind::Io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError(LoadError::Kind::Io, "failed writing " + path.string());
}

inline EncoderDecoderModel load_weights(const std::filesystem::path& path,
                                        const std::optional<ModelConfig>& expected = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::Io, "cannot open weight file " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(std::move(bytes), expected);
}

}  // namespace respwave::model
