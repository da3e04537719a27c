// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/extraction.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include <fmt/core.h>

#include "layerprobe/error.hpp"
#include "layerprobe/inference.hpp"

namespace layerprobe {

Landmarks canonical_template(std::uint32_t canvas_side) {
  const double s = canvas_side / 120.0;
  Landmarks out = kTemplate120;
  for (auto& p : out) p = {p.x * s, p.y * s};
  return out;
}

void validate_landmarks(const Landmarks& lm) {
  for (const auto& p : lm) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(Errc::DegenerateLandmarks, "non-finite coordinate");
  }
  for (const auto& p : lm) {
    if (p != lm[0]) return;
  }
  throw Error(Errc::DegenerateLandmarks, "all five points coincide");
}

double SimilarityTransform::scale() const { return std::hypot(a, b); }
double SimilarityTransform::rotation() const { return std::atan2(b, a); }

Point2 SimilarityTransform::apply(Point2 p) const { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }

Point2 SimilarityTransform::apply_inverse(Point2 p) const {
  const double u = p.x - tx, v = p.y - ty;
  const double det = a * a + b * b;
  return {(a * u + b * v) / det, (a * v - b * u) / det};
}

SimilarityTransform fit_similarity(const Landmarks& from, const Landmarks& to) {
  validate_landmarks(from);
  Point2 mf, mt;
  for (std::size_t i = 0; i < from.size(); ++i) {
    mf.x += from[i].x;
    mf.y += from[i].y;
    mt.x += to[i].x;
    mt.y += to[i].y;
  }
  mf = {mf.x / 5.0, mf.y / 5.0};
  mt = {mt.x / 5.0, mt.y / 5.0};

  double norm = 0.0, dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double px = from[i].x - mf.x, py = from[i].y - mf.y;
    const double qx = to[i].x - mt.x, qy = to[i].y - mt.y;
    norm += px * px + py * py;
    dot += px * qx + py * qy;
    cross += px * qy - py * qx;
  }
  if (!(norm > 0.0)) throw Error(Errc::DegenerateLandmarks, "landmarks have no spread");

  SimilarityTransform t;
  t.a = dot / norm;
  t.b = cross / norm;
  if (t.a == 0.0 && t.b == 0.0) throw Error(Errc::DegenerateLandmarks, "target landmarks have no spread");
  t.tx = mt.x - (t.a * mf.x - t.b * mf.y);
  t.ty = mt.y - (t.b * mf.x + t.a * mf.y);
  return t;
}

Tensor align_similarity(const Tensor& image, const Landmarks& lm, const Landmarks& templ, std::uint32_t out_side) {
  if (out_side == 0) throw Error(Errc::InvalidArgument, "output side must be positive");
  const auto t = fit_similarity(lm, templ);
  const auto& d = image.dims();
  const std::size_t plane = std::size_t{out_side} * out_side;
  std::vector<float> out(std::size_t{d.c} * plane, 0.0f);

  auto pixel = [&](std::uint32_t c, std::int64_t y, std::int64_t x) -> double {
    if (y < 0 || x < 0 || y >= d.h || x >= d.w) return 0.0;
    return image.at(c, static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x));
  };

  for (std::uint32_t v = 0; v < out_side; ++v) {
    for (std::uint32_t u = 0; u < out_side; ++u) {
      const auto src = t.apply_inverse({static_cast<double>(u), static_cast<double>(v)});
      const double fx0 = std::floor(src.x), fy0 = std::floor(src.y);
      if (fx0 < -2.0 || fy0 < -2.0 || fx0 > d.w + 1.0 || fy0 > d.h + 1.0) continue;
      const auto x0 = static_cast<std::int64_t>(fx0), y0 = static_cast<std::int64_t>(fy0);
      const double fx = src.x - fx0, fy = src.y - fy0;
      for (std::uint32_t c = 0; c < d.c; ++c) {
        const double top = pixel(c, y0, x0) * (1.0 - fx) + pixel(c, y0, x0 + 1) * fx;
        const double bottom = pixel(c, y0 + 1, x0) * (1.0 - fx) + pixel(c, y0 + 1, x0 + 1) * fx;
        out[c * plane + std::size_t{v} * out_side + u] = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return Tensor({d.c, out_side, out_side}, std::move(out));
}

PatchPair make_patch_pair(const Tensor& aligned, std::uint32_t crop_side) {
  auto center = crop_center(aligned, crop_side);
  auto mirrored = hflip(center);
  return {std::move(center), std::move(mirrored)};
}

Tensor preprocess(const Tensor& patch, std::span<const float> channel_means) {
  const auto& d = patch.dims();
  if (channel_means.size() != d.c) {
    throw Error(Errc::ShapeMismatch, fmt::format("{} channel means for a {}-channel patch", channel_means.size(), d.c));
  }
  std::vector<float> out(patch.data().begin(), patch.data().end());
  const std::size_t plane = std::size_t{d.h} * d.w;
  for (std::uint32_t c = 0; c < d.c; ++c) {
    for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) out[i] = out[i] / 255.0f - channel_means[c];
  }
  return Tensor(d, std::move(out));
}

RepresentationSet describe_patch(const Model& model, const Tensor& preprocessed_patch) {
  const auto fwd = forward_with_taps(model, preprocessed_patch);
  RepresentationSet set;
  for (const auto& [kind, layer] : model.spec().taps) {
    const Tensor& tap = fwd.taps.at(layer);
    if (is_spatial(kind)) {
      const auto pooled = adaptive_maxpool(tap, pooled_side(kind));
      set[kind].assign(pooled.data().begin(), pooled.data().end());
    } else {
      set[kind].assign(tap.data().begin(), tap.data().end());
    }
  }
  return set;
}

RepresentationSet extract_representation_set(const Model& model, const Tensor& aligned, std::uint32_t crop_side,
                                             std::string image_id) {
  const auto pair = make_patch_pair(aligned, crop_side);
  const auto& means = model.spec().channel_means;
  const auto a = describe_patch(model, preprocess(pair.center, means));
  const auto b = describe_patch(model, preprocess(pair.mirrored, means));
  RepresentationSet out;
  out.image_id = std::move(image_id);
  for (auto k : kAllKinds) out[k] = average(a[k], b[k]);
  return out;
}

// ---------------------------------------------------------------------------
// PNM

namespace {

class PnmHeader {
 public:
  explicit PnmHeader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t number(const char* what) {
    skip_space_and_comments();
    std::uint64_t v = 0;
    const auto start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 0xFFFFFFFFu) break;
    }
    if (pos_ == start || v == 0 || v > 0xFFFFFFFFu) {
      throw Error(Errc::BadImage, fmt::format("offset {}: bad {}", start, what));
    }
    return static_cast<std::uint32_t>(v);
  }

  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw Error(Errc::BadImage, fmt::format("offset {}: expected whitespace after header", pos_));
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(Errc::BadMagic, "offset 0: expected binary PNM (P5 or P6)");
  }
  const std::uint32_t channels = bytes[1] == '5' ? 1 : 3;
  PnmHeader h(bytes);
  h.advance(2);
  const auto width = h.number("width");
  const auto height = h.number("height");
  const auto maxval = h.number("maxval");
  if (maxval != 255) throw Error(Errc::BadImage, fmt::format("maxval {} unsupported (need 255)", maxval));
  h.single_space();

  const std::size_t pixels = std::size_t{width} * height;
  const std::size_t need = pixels * channels;
  if (bytes.size() - h.pos() < need) {
    throw Error(Errc::TruncatedFile,
                fmt::format("offset {}: need {} pixel bytes, {} left", h.pos(), need, bytes.size() - h.pos()));
  }
  if (bytes.size() - h.pos() > need) {
    throw Error(Errc::TrailingBytes, fmt::format("offset {}: bytes after pixel data", h.pos() + need));
  }
  std::vector<float> data(need);
  const auto* px = bytes.data() + h.pos();
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::uint32_t c = 0; c < channels; ++c) data[c * pixels + i] = px[i * channels + c];
  }
  return Tensor({channels, height, width}, std::move(data));
}

Bytes encode_pnm(const Tensor& image) {
  const auto& d = image.dims();
  if (d.c != 1 && d.c != 3) throw Error(Errc::BadImage, fmt::format("cannot store {} channels as PNM", d.c));
  ByteWriter w;
  w.text(fmt::format("P{}\n{} {}\n255\n", d.c == 1 ? 5 : 6, d.w, d.h));
  const std::size_t pixels = std::size_t{d.h} * d.w;
  Bytes px(pixels * d.c);
  const auto src = image.data();
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::uint32_t c = 0; c < d.c; ++c) {
      const float v = std::round(src[c * pixels + i]);
      px[i * d.c + c] = static_cast<std::uint8_t>(v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v));
    }
  }
  w.bytes(px);
  return w.take();
}

Tensor read_pnm(const std::filesystem::path& path) {
  try {
    return decode_pnm(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.context()));
  }
}

// ---------------------------------------------------------------------------
// FEA1 feature cache

FeatureCache make_cache(std::span<const RepresentationSet> sets, RepKind kind) {
  FeatureCache cache;
  cache.kind = kind;
  std::set<std::string> seen;
  for (const auto& s : sets) {
    const auto& v = s[kind];
    if (cache.ids.empty()) {
      cache.dim = static_cast<std::uint32_t>(v.size());
    } else if (v.size() != cache.dim) {
      throw Error(Errc::DimMismatch, fmt::format("\"{}\" has {} values for {}, expected {}", s.image_id, v.size(),
                                                 kind_tag(kind), cache.dim));
    }
    if (!seen.insert(s.image_id).second) throw Error(Errc::DuplicateImageId, s.image_id);
    cache.ids.push_back(s.image_id);
    cache.vectors.push_back(v);
  }
  return cache;
}

Bytes encode_cache(const FeatureCache& cache) {
  if (cache.ids.size() != cache.vectors.size()) throw Error(Errc::DimMismatch, "ids and vectors differ in count");
  std::set<std::string_view> seen;
  ByteWriter w;
  w.text("FEA1");
  w.u8(static_cast<std::uint8_t>(cache.kind));
  w.u32(cache.dim);
  w.u32(static_cast<std::uint32_t>(cache.ids.size()));
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    const auto& id = cache.ids[i];
    if (id.size() > 0xFFFF) throw Error(Errc::InvalidArgument, "image id longer than 65535 bytes");
    if (!seen.insert(id).second) throw Error(Errc::DuplicateImageId, id);
    if (cache.vectors[i].size() != cache.dim) {
      throw Error(Errc::DimMismatch,
                  fmt::format("\"{}\" has {} values, expected {}", id, cache.vectors[i].size(), cache.dim));
    }
    w.u16(static_cast<std::uint16_t>(id.size()));
    w.text(id);
    w.f32s(cache.vectors[i]);
  }
  return w.take();
}

FeatureCache decode_cache(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("FEA1");
  FeatureCache cache;
  const auto tag = r.u8("kind tag");
  if (tag > 3) throw Error(Errc::BadMagic, fmt::format("offset 4: unknown kind tag {}", tag));
  cache.kind = static_cast<RepKind>(tag);
  cache.dim = r.u32("dim");
  const auto count = r.u32("record count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto at = r.offset();
    const auto len = r.u16("id length");
    auto id = r.text(len, "image id");
    if (!seen.insert(id).second) throw Error(Errc::DuplicateImageId, fmt::format("offset {}: {}", at, id));
    cache.vectors.push_back(r.f32s(cache.dim, "feature values"));
    cache.ids.push_back(std::move(id));
  }
  r.expect_end();
  return cache;
}

void cache_write(const std::filesystem::path& path, std::span<const RepresentationSet> sets, RepKind kind) {
  write_file_atomic(path, encode_cache(make_cache(sets, kind)));
}

FeatureCache cache_read(const std::filesystem::path& path) {
  try {
    return decode_cache(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::IoError) throw;
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.context()));
  }
}

}  // namespace layerprobe
