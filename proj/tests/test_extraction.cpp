// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "layerprobe/extraction.hpp"
#include "layerprobe/inference.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace layerprobe;
using testutil::catch_error;

namespace {

Tensor random_image(std::mt19937_64& rng, Dims d) {
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<float> v(d.size());
  for (auto& x : v) x = static_cast<float>(u(rng));
  return Tensor(d, std::move(v));
}

constexpr const char* kSmallNet =
    "input 1 10 10\n"
    "mean 0.5\n"
    "layer conv1 Conv2D out=3 kh=3 kw=3 stride=1 pad=1\n"
    "layer act1 PReLU\n"
    "layer pool1 MaxPool2D kernel=2 stride=2 ceil=1\n"
    "layer fc1 FullyConnected out=5\n"
    "layer act2 PReLU\n"
    "layer drop Dropout rate=0.5\n"
    "layer fc2 FullyConnected out=4\n"
    "layer act3 PReLU\n"
    "layer prob Softmax\n"
    "tap spat3 pool1\ntap spat1 pool1\ntap fc1 drop\ntap fc2 act3\n";

}  // namespace

TEST_CASE("similarity fit") {
  const auto templ = canonical_template(120);
  CHECK(templ == kTemplate120);

  const auto id = fit_similarity(templ, templ);
  CHECK(id.a == 1.0);
  CHECK(id.b == 0.0);
  CHECK(id.tx == 0.0);
  CHECK(id.ty == 0.0);

  Landmarks doubled = templ;
  for (auto& p : doubled) p = {2.0 * p.x, 2.0 * p.y};
  CHECK(std::abs(fit_similarity(doubled, templ).scale() - 0.5) <= 1e-6);

  // A known rotation + scale + shift is recovered and maps the points exactly.
  const double theta = 0.3, s = 1.7, tx = -12.0, ty = 9.5;
  Landmarks moved;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& p = templ[i];
    moved[i] = {s * (std::cos(theta) * p.x - std::sin(theta) * p.y) + tx,
                s * (std::sin(theta) * p.x + std::cos(theta) * p.y) + ty};
  }
  const auto t = fit_similarity(templ, moved);
  CHECK(std::abs(t.scale() - s) <= 1e-9);
  CHECK(std::abs(t.rotation() - theta) <= 1e-9);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto q = t.apply(templ[i]);
    CHECK(std::abs(q.x - moved[i].x) <= 1e-9);
    CHECK(std::abs(q.y - moved[i].y) <= 1e-9);
    const auto back = t.apply_inverse(moved[i]);
    CHECK(std::abs(back.x - templ[i].x) <= 1e-9);
  }

  Landmarks same;
  same.fill({3.0, 4.0});
  CHECK(catch_error([&] { validate_landmarks(same); }).code == Errc::DegenerateLandmarks);
  CHECK(catch_error([&] { fit_similarity(same, templ); }).code == Errc::DegenerateLandmarks);
  Landmarks nan = templ;
  nan[2].x = std::nan("");
  CHECK(catch_error([&] { validate_landmarks(nan); }).code == Errc::DegenerateLandmarks);
}

TEST_CASE("alignment") {
  std::mt19937_64 rng(1);
  const Tensor img = random_image(rng, {1, 120, 120});
  CHECK(align_similarity(img, kTemplate120, kTemplate120, 120) == img);

  // Landmarks shifted by an integer offset: the warp is a pure translation and
  // bilinear weights collapse to single pixels, with zeros outside the source.
  Landmarks shifted = kTemplate120;
  for (auto& p : shifted) p = {p.x + 3.0, p.y - 2.0};
  const Tensor a = align_similarity(img, shifted, kTemplate120, 120);
  for (std::uint32_t y = 0; y < 120; ++y)
    for (std::uint32_t x = 0; x < 120; ++x) {
      const int sy = static_cast<int>(y) - 2, sx = static_cast<int>(x) + 3;
      const float want = (sy < 0 || sx >= 120) ? 0.0f : img.at(0, sy, sx);
      CHECK(a.at(0, y, x) == want);
    }

  // Half-pixel shift: each output is the mean of two horizontal neighbours.
  Landmarks half = kTemplate120;
  for (auto& p : half) p.x += 0.5;
  const Tensor h = align_similarity(img, half, kTemplate120, 120);
  for (std::uint32_t x = 0; x + 1 < 120; ++x)
    CHECK(std::abs(h.at(0, 50, x) - 0.5 * (img.at(0, 50, x) + img.at(0, 50, x + 1))) <= 1e-4);
}

TEST_CASE("patch pair") {
  std::mt19937_64 rng(2);
  const Tensor aligned = random_image(rng, {3, 120, 120});
  const auto pair = make_patch_pair(aligned, 112);
  CHECK(pair.center.dims() == Dims{3, 112, 112});
  CHECK(pair.mirrored == hflip(pair.center));

  // Left-right symmetric image.
  std::vector<float> v(120 * 120);
  for (std::uint32_t y = 0; y < 120; ++y)
    for (std::uint32_t x = 0; x < 60; ++x) v[y * 120 + x] = v[y * 120 + 119 - x] = static_cast<float>(rng() % 256);
  const auto sym = make_patch_pair(Tensor({1, 120, 120}, v), 112);
  CHECK(sym.center == sym.mirrored);

  CHECK(catch_error([&] { make_patch_pair(aligned, 121); }).code == Errc::CropTooLarge);
}

TEST_CASE("representations on an identity stack are constant") {
  const ModelSpec spec = parse_manifest(
      "input 1 6 6\nmean 0\n"
      "layer c Conv2D out=1 kh=1 kw=1\n"
      "layer f FullyConnected out=36\nlayer g FullyConnected out=36\n"
      "tap spat3 c\ntap spat1 c\ntap fc1 f\ntap fc2 g\n");
  std::vector<float> eye(36 * 36, 0.0f);
  for (int i = 0; i < 36; ++i) eye[i * 36 + i] = 1.0f;
  const Model m(spec, {{"c.weight", {{1, 1, 1, 1}, {1.0f}}},
                       {"c.bias", {{1}, {0.0f}}},
                       {"f.weight", {{36, 36}, eye}},
                       {"f.bias", {{36}, std::vector<float>(36, 0.0f)}},
                       {"g.weight", {{36, 36}, eye}},
                       {"g.bias", {{36}, std::vector<float>(36, 0.0f)}}});
  const auto set = extract_representation_set(m, Tensor::filled({1, 8, 8}, 51.0f), 6);
  const float want = 51.0f / 255.0f;
  CHECK(set[RepKind::Spat3x3] == std::vector<float>(9, want));
  CHECK(set[RepKind::Spat1x1] == std::vector<float>(1, want));
  CHECK(set[RepKind::FC1] == std::vector<float>(36, want));
  CHECK(set[RepKind::FC2] == std::vector<float>(36, want));
}

TEST_CASE("representation values compose the per-op oracles") {
  const ModelSpec spec = parse_manifest(kSmallNet);
  const Model m = testutil::random_model(spec, 5);
  std::mt19937_64 rng(3);
  const Tensor aligned = random_image(rng, {1, 12, 12});
  const auto set = extract_representation_set(m, aligned, 10, "x");
  CHECK(set.image_id == "x");

  const auto pair = make_patch_pair(aligned, 10);
  std::array<std::vector<double>, 4> sum;
  for (const Tensor* patch : {&pair.center, &pair.mirrored}) {
    oracle::Map in = oracle::from_tensor(*patch);
    for (auto& v : in.v) v = static_cast<float>(static_cast<float>(v) / 255.0f - 0.5f);
    auto conv = oracle::conv(in, m.param("conv1.weight"), m.param("conv1.bias").values, 1, 1);
    auto act = oracle::prelu(conv, m.param("act1.slope").values);
    auto pool = oracle::maxpool(act, 2, 2, true);
    const auto p3 = oracle::adaptive_maxpool(pool, 3);
    const auto p1 = oracle::adaptive_maxpool(pool, 1);
    // Per patch, Spat1x1 is the per-channel max of Spat3x3.
    for (int c = 0; c < 3; ++c)
      CHECK(p1.v[c] == *std::max_element(p3.v.begin() + c * 9, p3.v.begin() + (c + 1) * 9));
    std::vector<double> flat = pool.v;
    auto f1 = oracle::fc(flat, m.param("fc1.weight"), m.param("fc1.bias").values);
    for (auto& v : f1) v = v > 0 ? v : 0.25 * v;
    auto f2 = oracle::fc(f1, m.param("fc2.weight"), m.param("fc2.bias").values);
    for (auto& v : f2) v = v > 0 ? v : 0.25 * v;
    const std::array<const std::vector<double>*, 4> parts{&p3.v, &p1.v, &f1, &f2};
    for (std::size_t k = 0; k < 4; ++k) {
      sum[k].resize(parts[k]->size());
      for (std::size_t i = 0; i < sum[k].size(); ++i) sum[k][i] += 0.5 * (*parts[k])[i];
    }
  }
  for (auto k : kAllKinds) {
    const auto& got = set[k];
    REQUIRE(got.size() == sum[kind_index(k)].size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double want = sum[kind_index(k)][i];
      CHECK(std::abs(got[i] - want) <= 1e-5 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("mirror invariance") {
  const ModelSpec spec = parse_manifest(kSmallNet);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const Model m = testutil::random_model(spec, 100 + t);
    const Tensor aligned = random_image(rng, {1, 14, 14});
    CHECK(extract_representation_set(m, hflip(aligned), 10) == extract_representation_set(m, aligned, 10));
  }
}

TEST_CASE("PNM") {
  std::mt19937_64 rng(5);
  for (std::uint32_t c : {1u, 3u}) {
    const Tensor img = random_image(rng, {c, 7, 5});
    const Bytes enc = encode_pnm(img);
    CHECK(decode_pnm(enc) == img);
    CHECK(encode_pnm(decode_pnm(enc)) == enc);
  }
  const std::string commented = "P5\n# made by hand\n2 1\n255\n\x01\x02";
  const Bytes b(commented.begin(), commented.end());
  CHECK(decode_pnm(b) == Tensor({1, 1, 2}, {1, 2}));

  auto bytes = [](const std::string& s) { return Bytes(s.begin(), s.end()); };
  CHECK(catch_error([&] { decode_pnm(bytes("P2\n1 1\n255\n0")); }).code == Errc::BadMagic);
  CHECK(catch_error([&] { decode_pnm(bytes("P5\n2 2\n255\n\x01")); }).code == Errc::TruncatedFile);
  CHECK(catch_error([&] { decode_pnm(bytes("P5\n1 1\n65535\n\x01\x01")); }).code == Errc::BadImage);
  CHECK(catch_error([&] { decode_pnm(bytes("P5\n1 1\n255\n\x01\x01")); }).code == Errc::TrailingBytes);
}

TEST_CASE("feature cache") {
  std::vector<RepresentationSet> sets(3);
  std::mt19937_64 rng(6);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sets[i].image_id = "img" + std::to_string(i) + ".ppm";
    for (auto k : kAllKinds) {
      std::normal_distribution<float> n;
      sets[i][k].resize(k == RepKind::Spat1x1 ? 4 : 36);
      for (auto& v : sets[i][k]) v = n(rng);
    }
  }
  const auto cache = make_cache(sets, RepKind::Spat3x3);
  CHECK(cache.dim == 36);
  const Bytes enc = encode_cache(cache);
  const auto back = decode_cache(enc);
  CHECK(back == cache);
  CHECK(encode_cache(back) == enc);

  const auto dir = testutil::scratch_dir("cache");
  cache_write(dir / "spat1.fea", sets, RepKind::Spat1x1);
  const auto disk = cache_read(dir / "spat1.fea");
  CHECK(disk.kind == RepKind::Spat1x1);
  CHECK(disk.ids == cache.ids);
  CHECK(disk.vectors[2] == sets[2][RepKind::Spat1x1]);

  auto dup = sets;
  dup[2].image_id = dup[0].image_id;
  CHECK(catch_error([&] { make_cache(dup, RepKind::FC1); }).code == Errc::DuplicateImageId);
  auto ragged = sets;
  ragged[1][RepKind::FC2].pop_back();
  CHECK(catch_error([&] { make_cache(ragged, RepKind::FC2); }).code == Errc::DimMismatch);

  const Bytes cut(enc.begin(), enc.end() - 5);
  const auto c = catch_error([&] { decode_cache(cut); });
  CHECK(c.code == Errc::TruncatedFile);
  CHECK(c.message.find("offset") != std::string::npos);
  Bytes magic = enc;
  magic[0] = 'G';
  CHECK(catch_error([&] { decode_cache(magic); }).code == Errc::BadMagic);
  Bytes extra = enc;
  extra.push_back(0);
  CHECK(catch_error([&] { decode_cache(extra); }).code == Errc::TrailingBytes);
}
