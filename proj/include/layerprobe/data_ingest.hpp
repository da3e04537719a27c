// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layerprobe/eval_select.hpp"
#include "layerprobe/extraction.hpp"
#include "layerprobe/model.hpp"

namespace layerprobe {

/// CelebA-style attribute annotations: line 1 image count, line 2 attribute
/// names, then `<image id> <+1/-1 per attribute>` rows.
struct AttributeTable {
  std::vector<std::string> attribute_names;
  std::vector<std::string> ids;                // file order
  std::vector<std::vector<std::int8_t>> rows;  // parallel to ids

  /// image id -> label for one attribute column.
  std::map<std::string, std::int8_t> column(std::size_t attribute) const;
  bool operator==(const AttributeTable&) const = default;
};

AttributeTable parse_attributes(std::string_view text);
std::string serialize_attributes(const AttributeTable& table);

/// `<image id> <0|1|2>` lines (train / val / test).
SplitAssignment parse_partition(std::string_view text);
std::string serialize_partition(const SplitAssignment& split);

/// `<image id> x1 y1 .. x5 y5` lines. A CelebA header (a count line followed
/// by a line of ten column names) is skipped when present.
std::map<std::string, Landmarks> parse_landmarks(std::string_view text);
std::string serialize_landmarks(const std::map<std::string, Landmarks>& landmarks);

// Planted-structure synthetic dataset.

struct Region {
  std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open box on the canvas
};

/// Presence rule when `negative` is empty: positives carry a blob inside
/// `positive`, negatives carry none. Location rule otherwise: every image
/// carries a blob, inside `positive` or `negative` according to its label.
struct AttributeRule {
  std::string name;
  Region positive;
  std::optional<Region> negative;
};

struct SynthConfig {
  std::uint32_t n_images = 2000;
  std::uint32_t canvas = 120;
  std::uint32_t crop = 112;
  std::uint32_t blob_size = 12;
  float background = 60.0f;
  float blob_intensity = 220.0f;
  float noise = 8.0f;  // Gaussian pixel noise sigma
  std::uint64_t seed = 0;
  std::vector<AttributeRule> rules;
};

/// A centred presence attribute ("center_blob") and a vertical location
/// attribute ("top_vs_bottom"), scaled to the canvas. The location regions
/// are mirror-symmetric so centre+mirror averaging keeps the signal.
std::vector<AttributeRule> default_rules(std::uint32_t canvas);

struct SynthOutput {
  AttributeTable attributes;
  SplitAssignment split;
  std::map<std::string, Landmarks> landmarks;
  ModelSpec spec;
  std::filesystem::path images_dir;
};

/// Small random-weight network for synthetic runs: two conv + PReLU + pool
/// stacks, then two FullyConnected + PReLU layers. Deterministic in `seed`.
Model make_synthetic_model(std::uint32_t crop, std::uint32_t channels, float channel_mean, std::uint64_t seed);

/// Writes images/<id>.pgm, attributes.txt, partition.txt, landmarks.txt,
/// model.nnm and model.nnw under out_dir. A pure function of cfg.
SynthOutput generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// The exact image generate_synthetic writes for index i (already quantised
/// to 8 bits), with its labels.
struct SynthImage {
  Tensor image;
  std::vector<std::int8_t> labels;
};
SynthImage render_synthetic(const SynthConfig& cfg, std::uint32_t index);

}  // namespace layerprobe
