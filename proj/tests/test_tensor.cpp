// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "layerprobe/error.hpp"
#include "layerprobe/tensor.hpp"
#include "test_util.hpp"

using namespace layerprobe;
using testutil::random_tensor;

namespace {

Errc code_of(const std::function<void()>& fn) {
  const auto c = testutil::catch_error(fn);
  REQUIRE(c.raised);
  return c.code;
}

}  // namespace

TEST_CASE("tensor construction and layout") {
  Tensor one({1, 1, 1}, {5.0f});
  CHECK(one.at(0, 0, 0) == 5.0f);

  Tensor t({1, 2, 2}, {1, 2, 3, 4});
  CHECK(t.at(0, 1, 0) == 3.0f);

  CHECK(code_of([] { Tensor({2, 2, 2}, std::vector<float>(7)); }) == Errc::LengthMismatch);
  CHECK(code_of([] { Tensor({1, 1, 2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}); }) ==
        Errc::NonFiniteValue);
  CHECK(code_of([] { Tensor({1, 1, 1}, {std::numeric_limits<float>::infinity()}); }) == Errc::NonFiniteValue);
}

TEST_CASE("hflip") {
  CHECK(hflip(Tensor({1, 1, 3}, {1, 2, 3})) == Tensor({1, 1, 3}, {3, 2, 1}));
  CHECK(hflip(Tensor({1, 2, 2}, {1, 2, 3, 4})) == Tensor({1, 2, 2}, {2, 1, 4, 3}));

  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const Dims d{1 + static_cast<std::uint32_t>(rng() % 3), 1 + static_cast<std::uint32_t>(rng() % 6),
                 1 + static_cast<std::uint32_t>(rng() % 6)};
    const Tensor t = random_tensor(rng, d);
    CHECK(hflip(hflip(t)) == t);
  }
}

TEST_CASE("crop_center") {
  std::vector<float> v(120 * 120);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const Tensor big({1, 120, 120}, v);
  const Tensor c = crop_center(big, 112);
  CHECK(c.dims() == Dims{1, 112, 112});
  CHECK(c.at(0, 0, 0) == big.at(0, 4, 4));
  CHECK(c.at(0, 111, 111) == big.at(0, 115, 115));

  CHECK(crop_center(big, 120) == big);
  CHECK(crop_center(Tensor({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), 1) == Tensor({1, 1, 1}, {5}));
  CHECK(code_of([&] { crop_center(big, 121); }) == Errc::CropTooLarge);

  // Every element of the crop is drawn from the source without arithmetic.
  std::mt19937_64 rng(3);
  const Tensor r = random_tensor(rng, {2, 9, 8});
  const Tensor rc = crop_center(r, 5);
  for (std::uint32_t ch = 0; ch < 2; ++ch)
    for (std::uint32_t y = 0; y < 5; ++y)
      for (std::uint32_t x = 0; x < 5; ++x) CHECK(rc.at(ch, y, x) == r.at(ch, y + 2, x + 1));
}

TEST_CASE("average") {
  std::mt19937_64 rng(11);
  const Tensor a = random_tensor(rng, {2, 3, 4});
  const Tensor b = random_tensor(rng, {2, 3, 4});
  CHECK(average(a, a) == a);
  CHECK(average(Tensor({1, 1, 2}, {0, 2}), Tensor({1, 1, 2}, {2, 0})) == Tensor({1, 1, 2}, {1, 1}));
  CHECK(average(a, b) == average(b, a));
  const Tensor m = average(a, b);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m.data()[i] >= std::min(a.data()[i], b.data()[i]));
    CHECK(m.data()[i] <= std::max(a.data()[i], b.data()[i]));
  }
  CHECK(code_of([&] { average(a, Tensor::filled({1, 3, 4}, 0.0f)); }) == Errc::ShapeMismatch);
}

TEST_CASE("TEN1 round trip and malformed input") {
  std::mt19937_64 rng(5);
  const Tensor t = random_tensor(rng, {3, 4, 5});
  const Bytes enc = encode_tensor(t);
  CHECK(decode_tensor(enc) == t);
  CHECK(encode_tensor(decode_tensor(enc)) == enc);

  Bytes bad = enc;
  bad[0] = 'X';
  CHECK(code_of([&] { decode_tensor(bad); }) == Errc::BadMagic);
  Bytes shorter(enc.begin(), enc.end() - 1);
  CHECK(code_of([&] { decode_tensor(shorter); }) == Errc::TruncatedFile);
  Bytes longer = enc;
  longer.push_back(0);
  CHECK(code_of([&] { decode_tensor(longer); }) == Errc::TrailingBytes);
}
