// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "layerprobe/binary_io.hpp"
#include "layerprobe/representation.hpp"
#include "layerprobe/tensor.hpp"

namespace layerprobe {

struct Conv2D {
  std::uint32_t out_channels = 1;
  std::uint32_t kernel_h = 1;
  std::uint32_t kernel_w = 1;
  std::uint32_t stride = 1;
  std::uint32_t pad = 0;
  bool operator==(const Conv2D&) const = default;
};

struct MaxPool2D {
  std::uint32_t kernel = 2;
  std::uint32_t stride = 2;
  bool ceil_mode = false;
  bool operator==(const MaxPool2D&) const = default;
};

struct PReLU {
  bool operator==(const PReLU&) const = default;
};

struct FullyConnected {
  std::uint32_t out_dim = 1;
  bool operator==(const FullyConnected&) const = default;
};

// Identity at inference time; kept so manifests describe the trained net.
struct Dropout {
  float rate = 0.5f;
  bool operator==(const Dropout&) const = default;
};

// Only used during training of the source network; never applied when
// extracting representations.
struct Softmax {
  bool operator==(const Softmax&) const = default;
};

using LayerOp = std::variant<Conv2D, MaxPool2D, PReLU, FullyConnected, Dropout, Softmax>;

std::string_view layer_kind_name(const LayerOp& op) noexcept;

struct LayerDesc {
  std::string name;
  LayerOp op;
  bool operator==(const LayerDesc&) const = default;
};

struct ModelSpec {
  Dims input{1, 1, 1};
  std::vector<float> channel_means;  // one per input channel
  std::vector<LayerDesc> layers;
  std::map<RepKind, std::string> taps;

  bool operator==(const ModelSpec&) const = default;

  std::size_t layer_index(std::string_view name) const;  // npos when absent
};

/// Line-oriented `.nnm` manifest:
///
///   # comment
///   input 3 120 120
///   mean 0.5 0.5 0.5
///   layer conv1 Conv2D out=32 kh=3 kw=3 stride=1 pad=1
///   layer pool1 MaxPool2D kernel=2 stride=2 ceil=1
///   layer act1 PReLU
///   layer fc1 FullyConnected out=512
///   layer drop1 Dropout rate=0.5
///   layer prob Softmax
///   tap spat3 pool5
///
/// Tap kinds are spat3, spat1, fc1 and fc2. A spatial tap must sit before the
/// first FullyConnected layer. An fc tap names a FullyConnected layer or a
/// PReLU/Dropout that directly follows it; fc1 binds to the first and fc2 to
/// the second of exactly two FullyConnected layers.
ModelSpec parse_manifest(std::string_view text);
std::string serialize_manifest(const ModelSpec& spec);

struct LayerShape {
  std::string name;
  Dims out;
  bool operator==(const LayerShape&) const = default;
};

/// Output dims of every layer in order. FullyConnected yields (out, 1, 1).
std::vector<LayerShape> infer_shapes(const ModelSpec& spec);

/// Rank 1..4 parameter array, row-major.
struct Parameter {
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
  bool operator==(const Parameter&) const = default;
};

struct ParameterSlot {
  std::string name;  // "<layer>.weight", "<layer>.bias", "<layer>.slope"
  std::vector<std::uint32_t> shape;
};

/// Parameters expected by the weight blob, in blob order. A PReLU slope is
/// listed with one value per channel; a single shared slope is also accepted.
std::vector<ParameterSlot> parameter_plan(const ModelSpec& spec);

/// A validated network: every parameter present, shaped per parameter_plan,
/// finite. Immutable after construction.
class Model {
 public:
  Model(ModelSpec spec, std::map<std::string, Parameter> params);

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerShape>& shapes() const noexcept { return shapes_; }
  const Parameter& param(const std::string& name) const;
  const std::map<std::string, Parameter>& params() const noexcept { return params_; }

 private:
  ModelSpec spec_;
  std::vector<LayerShape> shapes_;
  std::map<std::string, Parameter> params_;
};

/// `.nnw` blob: "NNW1" then one record per parameter in parameter_plan order:
/// name (u16 length + bytes), rank (u8), dims (u32 each), f32 values.
Model load_weights(const ModelSpec& spec, std::span<const std::uint8_t> blob);
Bytes encode_weights(const Model& model);

Model load_model(const std::filesystem::path& manifest, const std::filesystem::path& weights);

}  // namespace layerprobe
