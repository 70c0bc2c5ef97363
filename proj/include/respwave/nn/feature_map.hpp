#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "respwave/errors.hpp"

namespace respwave::nn {

/// Dense channels x length signal, row-major by channel.
template <std::floating_point T>
class BasicFeatureMap {
 public:
  using value_type = T;

  BasicFeatureMap() = default;
  BasicFeatureMap(std::size_t channels, std::size_t length, T fill = T{0})
      : channels_(channels), length_(length), values_(channels * length, fill) {
    if (channels == 0 || length == 0) throw ShapeError("feature map needs positive channels and length");
  }
  BasicFeatureMap(std::size_t channels, std::size_t length, std::vector<T> values)
      : channels_(channels), length_(length), values_(std::move(values)) {
    if (channels == 0 || length == 0) throw ShapeError("feature map needs positive channels and length");
    if (values_.size() != channels * length)
      throw ShapeError("feature map value count " + std::to_string(values_.size()) + " != " +
                       std::to_string(channels) + "x" + std::to_string(length));
  }

  /// Single-channel map holding `values`.
  static BasicFeatureMap row(std::span<const T> values) {
    return BasicFeatureMap(1, values.size(), std::vector<T>(values.begin(), values.end()));
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(std::size_t c, std::size_t t) noexcept { return values_[c * length_ + t]; }
  T operator()(std::size_t c, std::size_t t) const noexcept { return values_[c * length_ + t]; }

  std::span<T> channel(std::size_t c) noexcept { return {values_.data() + c * length_, length_}; }
  std::span<const T> channel(std::size_t c) const noexcept { return {values_.data() + c * length_, length_}; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  bool same_shape(const BasicFeatureMap& other) const noexcept {
    return channels_ == other.channels_ && length_ == other.length_;
  }

  bool all_finite() const noexcept {
    for (T v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const BasicFeatureMap&, const BasicFeatureMap&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<T> values_;
};

using FeatureMap = BasicFeatureMap<double>;

inline std::string shape_string(std::size_t channels, std::size_t length) {
  return std::to_string(channels) + "x" + std::to_string(length);
}

template <std::floating_point T>
std::string shape_string(const BasicFeatureMap<T>& m) {
  return shape_string(m.channels(), m.length());
}

}  // namespace respwave::nn
