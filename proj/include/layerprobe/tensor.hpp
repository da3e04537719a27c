// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "layerprobe/binary_io.hpp"

namespace layerprobe {

struct Dims {
  std::uint32_t c = 1;
  std::uint32_t h = 1;
  std::uint32_t w = 1;

  std::size_t size() const noexcept { return std::size_t{c} * h * w; }
  bool operator==(const Dims&) const = default;
};

/// Dense (channels, height, width) float tensor, channel-major then
/// row-major: element (c, y, x) lives at data[c*H*W + y*W + x].
///
/// Immutable once constructed. Construction validates the length and
/// rejects NaN/Inf, so every Tensor in the program holds finite values.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Dims dims, std::vector<float> data);

  static Tensor filled(Dims dims, float value);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> channel(std::uint32_t c) const;

  float at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return data_[(std::size_t{c} * dims_.h + y) * dims_.w + x];
  }

  bool operator==(const Tensor&) const = default;

 private:
  Dims dims_{0, 0, 0};
  std::vector<float> data_;
};

Tensor hflip(const Tensor& t);

/// Square crop whose top-left corner is (floor((H-side)/2), floor((W-side)/2)).
Tensor crop_center(const Tensor& t, std::uint32_t side);

Tensor average(const Tensor& a, const Tensor& b);
std::vector<float> average(std::span<const float> a, std::span<const float> b);

// "TEN1" raw tensor format.
Bytes encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

}  // namespace layerprobe
