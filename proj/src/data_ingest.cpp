// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/core.h>

#include "layerprobe/error.hpp"
#include "layerprobe/text.hpp"

namespace layerprobe {

// ---------------------------------------------------------------------------
// Text parsers

std::map<std::string, std::int8_t> AttributeTable::column(std::size_t attribute) const {
  std::map<std::string, std::int8_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], rows[i].at(attribute));
  return out;
}

AttributeTable parse_attributes(std::string_view doc) {
  const auto all = text::lines(doc);
  if (all.size() < 2) throw Error(Errc::BadHeader, "line 1: need a count line and a names line");
  const auto count_tok = text::fields(all[0]);
  std::optional<std::uint32_t> count;
  if (count_tok.size() == 1) count = text::parse_u32(count_tok[0]);
  if (!count) throw Error(Errc::BadHeader, "line 1: expected the image count");

  AttributeTable t;
  for (auto name : text::fields(all[1])) t.attribute_names.emplace_back(name);
  if (t.attribute_names.empty()) throw Error(Errc::BadHeader, "line 2: no attribute names");
  if (std::set<std::string>(t.attribute_names.begin(), t.attribute_names.end()).size() != t.attribute_names.size()) {
    throw Error(Errc::BadHeader, "line 2: repeated attribute name");
  }

  std::set<std::string> seen;
  for (std::size_t n = 2; n < all.size(); ++n) {
    const auto line = n + 1;
    const auto tok = text::fields(all[n]);
    if (tok.empty()) continue;
    if (tok.size() != t.attribute_names.size() + 1) {
      throw Error(Errc::RowWidthMismatch, fmt::format("line {}: {} labels, expected {}", line, tok.size() - 1,
                                                      t.attribute_names.size()));
    }
    std::string id(tok[0]);
    if (!seen.insert(id).second) throw Error(Errc::DuplicateId, fmt::format("line {}: {}", line, id));
    std::vector<std::int8_t> labels;
    labels.reserve(tok.size() - 1);
    for (std::size_t i = 1; i < tok.size(); ++i) {
      if (tok[i] == "1" || tok[i] == "+1") {
        labels.push_back(1);
      } else if (tok[i] == "-1") {
        labels.push_back(-1);
      } else {
        throw Error(Errc::BadLabelValue, fmt::format("line {}: \"{}\" in column {}", line, tok[i], i));
      }
    }
    t.ids.push_back(std::move(id));
    t.rows.push_back(std::move(labels));
  }
  if (t.ids.size() != *count) {
    throw Error(Errc::BadHeader, fmt::format("line 1: declares {} images, found {}", *count, t.ids.size()));
  }
  return t;
}

std::string serialize_attributes(const AttributeTable& t) {
  std::string out = fmt::format("{}\n", t.ids.size());
  for (std::size_t i = 0; i < t.attribute_names.size(); ++i) out += (i ? " " : "") + t.attribute_names[i];
  out += '\n';
  for (std::size_t r = 0; r < t.ids.size(); ++r) {
    out += t.ids[r];
    for (auto v : t.rows[r]) out += v == 1 ? " 1" : " -1";
    out += '\n';
  }
  return out;
}

SplitAssignment parse_partition(std::string_view doc) {
  SplitAssignment out;
  const auto all = text::lines(doc);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const auto line = n + 1;
    const auto tok = text::fields(all[n]);
    if (tok.empty()) continue;
    if (tok.size() != 2) throw Error(Errc::FieldCount, fmt::format("line {}: expected `<id> <digit>`", line));
    Split s;
    if (tok[1] == "0") {
      s = Split::Train;
    } else if (tok[1] == "1") {
      s = Split::Val;
    } else if (tok[1] == "2") {
      s = Split::Test;
    } else {
      throw Error(Errc::BadSplitDigit, fmt::format("line {}: \"{}\"", line, tok[1]));
    }
    if (!out.emplace(std::string(tok[0]), s).second) {
      throw Error(Errc::DuplicateId, fmt::format("line {}: {}", line, tok[0]));
    }
  }
  return out;
}

std::string serialize_partition(const SplitAssignment& split) {
  std::string out;
  for (const auto& [id, s] : split) out += fmt::format("{} {}\n", id, static_cast<int>(s));
  return out;
}

std::map<std::string, Landmarks> parse_landmarks(std::string_view doc) {
  const auto all = text::lines(doc);
  std::size_t first = 0;
  if (all.size() >= 2) {
    const auto head = text::fields(all[0]);
    if (head.size() == 1 && text::parse_u32(head[0]) && text::fields(all[1]).size() == 10) first = 2;
  }
  std::map<std::string, Landmarks> out;
  for (std::size_t n = first; n < all.size(); ++n) {
    const auto line = n + 1;
    const auto tok = text::fields(all[n]);
    if (tok.empty()) continue;
    if (tok.size() != 11) throw Error(Errc::FieldCount, fmt::format("line {}: {} fields, expected 11", line, tok.size()));
    Landmarks lm;
    for (std::size_t i = 0; i < 5; ++i) {
      auto x = text::parse_double(tok[1 + 2 * i]);
      auto y = text::parse_double(tok[2 + 2 * i]);
      if (!x || !y) {
        throw Error(Errc::NonNumeric, fmt::format("line {}: point {} is \"{} {}\"", line, i + 1, tok[1 + 2 * i],
                                                  tok[2 + 2 * i]));
      }
      lm[i] = {*x, *y};
    }
    try {
      validate_landmarks(lm);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("line {}: {}", line, e.context()));
    }
    if (!out.emplace(std::string(tok[0]), lm).second) {
      throw Error(Errc::DuplicateId, fmt::format("line {}: {}", line, tok[0]));
    }
  }
  return out;
}

std::string serialize_landmarks(const std::map<std::string, Landmarks>& landmarks) {
  std::string out;
  for (const auto& [id, lm] : landmarks) {
    out += id;
    for (const auto& p : lm) out += " " + text::format_double(p.x) + " " + text::format_double(p.y);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

std::vector<AttributeRule> default_rules(std::uint32_t canvas) {
  auto at = [canvas](double v) { return static_cast<std::uint32_t>(std::lround(v * canvas / 120.0)); };
  return {
      {"center_blob", {at(44), at(46), at(76), at(74)}, std::nullopt},
      {"top_vs_bottom", {at(30), at(12), at(90), at(36)}, Region{at(30), at(84), at(90), at(108)}},
  };
}

namespace {

void check_region(const Region& r, const SynthConfig& cfg, const std::string& rule) {
  if (r.x1 > cfg.canvas || r.y1 > cfg.canvas || r.x0 + cfg.blob_size > r.x1 || r.y0 + cfg.blob_size > r.y1) {
    throw Error(Errc::RegionOutOfBounds,
                fmt::format("rule {}: region [{},{})x[{},{}) cannot hold a {}px blob on a {}px canvas", rule, r.x0,
                            r.x1, r.y0, r.y1, cfg.blob_size, cfg.canvas));
  }
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_images < 4) throw Error(Errc::InvalidArgument, "n_images must be >= 4");
  if (cfg.crop == 0 || cfg.crop > cfg.canvas) throw Error(Errc::CropTooLarge, "crop must fit the canvas");
  if (cfg.blob_size == 0) throw Error(Errc::InvalidArgument, "blob size must be positive");
  if (cfg.rules.empty()) throw Error(Errc::InvalidArgument, "no attribute rules");
  for (const auto& rule : cfg.rules) {
    if (rule.name.empty() || rule.name.find_first_of(" \t") != std::string::npos) {
      throw Error(Errc::InvalidArgument, fmt::format("bad attribute name \"{}\"", rule.name));
    }
    check_region(rule.positive, cfg, rule.name);
    if (rule.negative) check_region(*rule.negative, cfg, rule.name);
  }
}

std::string image_id(std::uint32_t index) { return fmt::format("{:06d}.pgm", index + 1); }

}  // namespace

SynthImage render_synthetic(const SynthConfig& cfg, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), index};
  std::mt19937_64 rng(seq);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<float> noise(0.0f, 1.0f);

  const std::uint32_t side = cfg.canvas;
  std::vector<float> px(std::size_t{side} * side, cfg.background);
  SynthImage out;
  auto blob = [&](const Region& r) {
    std::uniform_int_distribution<std::uint32_t> ux(r.x0, r.x1 - cfg.blob_size);
    std::uniform_int_distribution<std::uint32_t> uy(r.y0, r.y1 - cfg.blob_size);
    const auto x0 = ux(rng), y0 = uy(rng);
    for (auto y = y0; y < y0 + cfg.blob_size; ++y) {
      for (auto x = x0; x < x0 + cfg.blob_size; ++x) px[std::size_t{y} * side + x] = cfg.blob_intensity;
    }
  };
  for (const auto& rule : cfg.rules) {
    const bool positive = coin(rng);
    out.labels.push_back(positive ? 1 : -1);
    if (positive) {
      blob(rule.positive);
    } else if (rule.negative) {
      blob(*rule.negative);
    }
  }
  for (auto& v : px) {
    const float n = cfg.noise > 0.0f ? cfg.noise * noise(rng) : 0.0f;
    v = std::clamp(std::round(v + n), 0.0f, 255.0f);
  }
  out.image = Tensor({1, side, side}, std::move(px));
  return out;
}

Model make_synthetic_model(std::uint32_t crop, std::uint32_t channels, float channel_mean, std::uint64_t seed) {
  ModelSpec spec;
  spec.input = {channels, crop, crop};
  spec.channel_means.assign(channels, channel_mean);
  spec.layers = {
      {"conv1", Conv2D{8, 5, 5, 2, 2}}, {"act1", PReLU{}},          {"pool1", MaxPool2D{2, 2, true}},
      {"conv2", Conv2D{16, 3, 3, 1, 1}}, {"act2", PReLU{}},         {"pool2", MaxPool2D{2, 2, true}},
      {"fc1", FullyConnected{32}},       {"act3", PReLU{}},         {"drop1", Dropout{0.5f}},
      {"fc2", FullyConnected{32}},       {"act4", PReLU{}},         {"prob", Softmax{}},
  };
  spec.taps = {{RepKind::Spat3x3, "pool2"}, {RepKind::Spat1x1, "pool2"}, {RepKind::FC1, "act3"}, {RepKind::FC2, "act4"}};
  // Round-trip through the manifest text so the spec is validated.
  spec = parse_manifest(serialize_manifest(spec));

  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::map<std::string, Parameter> params;
  for (const auto& slot : parameter_plan(spec)) {
    Parameter p{slot.shape, {}};
    std::size_t count = 1;
    for (auto d : slot.shape) count *= d;
    p.values.resize(count);
    if (slot.name.ends_with(".weight")) {
      const std::size_t fan_in = count / slot.shape[0];
      const bool conv = slot.shape.size() == 4;
      const float scale = std::sqrt((conv ? 2.0f : 1.0f) / static_cast<float>(fan_in));
      for (auto& v : p.values) v = scale * gauss(rng);
    } else if (slot.name.ends_with(".slope")) {
      std::fill(p.values.begin(), p.values.end(), 0.25f);
    }
    params.emplace(slot.name, std::move(p));
  }
  return Model(std::move(spec), std::move(params));
}

SynthOutput generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  validate(cfg);
  SynthOutput out;
  out.images_dir = out_dir / "images";
  std::filesystem::create_directories(out.images_dir);

  out.attributes.attribute_names.reserve(cfg.rules.size());
  for (const auto& r : cfg.rules) out.attributes.attribute_names.push_back(r.name);
  const auto templ = canonical_template(cfg.canvas);
  for (std::uint32_t i = 0; i < cfg.n_images; ++i) {
    auto img = render_synthetic(cfg, i);
    const auto id = image_id(i);
    write_file_atomic(out.images_dir / id, encode_pnm(img.image));
    out.attributes.ids.push_back(id);
    out.attributes.rows.push_back(std::move(img.labels));
    out.landmarks.emplace(id, templ);
  }

  // 60/20/20 split over a seeded shuffle of image indices.
  std::vector<std::uint32_t> order(cfg.n_images);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  const std::uint32_t n_train = cfg.n_images * 3 / 5;
  const std::uint32_t n_val = cfg.n_images / 5;
  for (std::uint32_t k = 0; k < cfg.n_images; ++k) {
    const Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    out.split.emplace(image_id(order[k]), s);
  }

  const auto model = make_synthetic_model(cfg.crop, 1, cfg.background / 255.0f, cfg.seed);
  out.spec = model.spec();
  write_file_atomic(out_dir / "attributes.txt", serialize_attributes(out.attributes));
  write_file_atomic(out_dir / "partition.txt", serialize_partition(out.split));
  write_file_atomic(out_dir / "landmarks.txt", serialize_landmarks(out.landmarks));
  write_file_atomic(out_dir / "model.nnm", serialize_manifest(model.spec()));
  write_file_atomic(out_dir / "model.nnw", encode_weights(model));
  return out;
}

}  // namespace layerprobe
