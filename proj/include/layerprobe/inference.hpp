// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "layerprobe/model.hpp"
#include "layerprobe/tensor.hpp"

namespace layerprobe {

// Layer primitives. Conv and FC accumulate in double, visiting input terms in
// ascending (channel, kernel row, kernel col) / input-index order, so results
// are bitwise reproducible.

/// kernel shape (out, in, kh, kw); out-of-range reads are zero padding.
Tensor conv2d(const Tensor& input, const Parameter& kernel, std::span<const float> bias, std::uint32_t stride,
              std::uint32_t pad);

/// Windows that run past the border (ceil mode) are clipped.
Tensor maxpool2d(const Tensor& input, std::uint32_t kernel, std::uint32_t stride, bool ceil_mode);

/// slopes holds one value per channel, or a single shared value.
Tensor prelu(const Tensor& input, std::span<const float> slopes);

/// Flattens the input; weight shape (out, in). Returns (out, 1, 1).
Tensor fully_connected(const Tensor& input, const Parameter& weight, std::span<const float> bias);

std::vector<float> softmax(std::span<const float> v);

struct BinRange {
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  bool operator==(const BinRange&) const = default;
};

/// Bin i covers [floor(i*extent/side), floor((i+1)*extent/side)); the bins
/// partition [0, extent).
std::vector<BinRange> adaptive_bins(std::uint32_t extent, std::uint32_t side);

/// Per-channel max over a side x side grid of adaptive bins.
Tensor adaptive_maxpool(const Tensor& input, std::uint32_t side);

/// Layer name -> copy of that layer's output.
using TapResults = std::map<std::string, Tensor>;

struct ForwardResult {
  std::vector<float> output;  // last non-Softmax layer, flattened
  TapResults taps;
};

/// Runs every layer in order. Dropout is the identity and Softmax is skipped.
ForwardResult forward_with_taps(const Model& model, const Tensor& input);

/// Output of every layer (Softmax layers pass their input through).
std::vector<Tensor> forward_all(const Model& model, const Tensor& input);

}  // namespace layerprobe
