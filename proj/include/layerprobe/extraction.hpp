// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "layerprobe/binary_io.hpp"
#include "layerprobe/model.hpp"
#include "layerprobe/representation.hpp"
#include "layerprobe/tensor.hpp"

namespace layerprobe {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Left eye, right eye, nose tip, left mouth corner, right mouth corner.
using Landmarks = std::array<Point2, 5>;

/// Canonical points on a 120x120 canvas.
inline constexpr Landmarks kTemplate120 = {{{40.0, 48.0}, {80.0, 48.0}, {60.0, 72.0}, {46.0, 92.0}, {74.0, 92.0}}};

/// kTemplate120 scaled to a square canvas of the given side.
Landmarks canonical_template(std::uint32_t canvas_side);

/// Raises DegenerateLandmarks when all points coincide or a coordinate is
/// not finite.
void validate_landmarks(const Landmarks& lm);

/// dst = [a -b; b a] * src + t. scale() = sqrt(a^2 + b^2).
struct SimilarityTransform {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  double scale() const;
  double rotation() const;  // radians
  Point2 apply(Point2 p) const;
  Point2 apply_inverse(Point2 p) const;
};

/// Least-squares similarity mapping `from` onto `to`.
SimilarityTransform fit_similarity(const Landmarks& from, const Landmarks& to);

/// Warps `image` so that `lm` lands on `templ`. Pixels are sampled
/// bilinearly at integer output coordinates; source reads outside the image
/// contribute 0.
Tensor align_similarity(const Tensor& image, const Landmarks& lm, const Landmarks& templ, std::uint32_t out_side);

struct PatchPair {
  Tensor center;
  Tensor mirrored;
};

PatchPair make_patch_pair(const Tensor& aligned, std::uint32_t crop_side);

/// Pixel values / 255, minus the manifest channel means.
Tensor preprocess(const Tensor& patch, std::span<const float> channel_means);

struct RepresentationSet {
  std::string image_id;
  std::array<std::vector<float>, 4> vectors;  // indexed by kind_index()

  const std::vector<float>& operator[](RepKind k) const { return vectors[kind_index(k)]; }
  std::vector<float>& operator[](RepKind k) { return vectors[kind_index(k)]; }
  bool operator==(const RepresentationSet&) const = default;
};

/// Descriptors of one patch: spatial taps pooled to 3x3 / 1x1 and flattened,
/// fc taps flattened. Kinds without a tap in the manifest stay empty.
RepresentationSet describe_patch(const Model& model, const Tensor& preprocessed_patch);

/// Center + mirrored patch through the model; each kind is pooled per patch
/// and the two pooled vectors are averaged.
RepresentationSet extract_representation_set(const Model& model, const Tensor& aligned, std::uint32_t crop_side,
                                             std::string image_id = {});

// Binary PNM (P5 grey / P6 colour, maxval 255) <-> (C,H,W) tensor of 0..255.
Tensor decode_pnm(std::span<const std::uint8_t> bytes);
Bytes encode_pnm(const Tensor& image);
Tensor read_pnm(const std::filesystem::path& path);

/// One kind's vectors for a list of images, as stored in a FEA1 file.
struct FeatureCache {
  RepKind kind = RepKind::Spat3x3;
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<float>> vectors;

  bool operator==(const FeatureCache&) const = default;
};

FeatureCache make_cache(std::span<const RepresentationSet> sets, RepKind kind);

/// "FEA1", kind u8, dim u32, count u32, then [id len u16, id, dim f32] records.
Bytes encode_cache(const FeatureCache& cache);
FeatureCache decode_cache(std::span<const std::uint8_t> bytes);

void cache_write(const std::filesystem::path& path, std::span<const RepresentationSet> sets, RepKind kind);
FeatureCache cache_read(const std::filesystem::path& path);

}  // namespace layerprobe
