// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "layerprobe/error.hpp"

namespace layerprobe {

Tensor::Tensor(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
  if (dims.c == 0 || dims.h == 0 || dims.w == 0) {
    throw Error(Errc::LengthMismatch, fmt::format("dims ({},{},{}) must all be >= 1", dims.c, dims.h, dims.w));
  }
  if (data_.size() != dims.size()) {
    throw Error(Errc::LengthMismatch,
                fmt::format("dims ({},{},{}) need {} values, got {}", dims.c, dims.h, dims.w, dims.size(),
                            data_.size()));
  }
  const auto bad = std::find_if(data_.begin(), data_.end(), [](float v) { return !std::isfinite(v); });
  if (bad != data_.end()) {
    throw Error(Errc::NonFiniteValue, fmt::format("element {} is not finite", bad - data_.begin()));
  }
}

Tensor Tensor::filled(Dims dims, float value) { return Tensor(dims, std::vector<float>(dims.size(), value)); }

std::span<const float> Tensor::channel(std::uint32_t c) const {
  const std::size_t plane = std::size_t{dims_.h} * dims_.w;
  return std::span<const float>(data_).subspan(c * plane, plane);
}

Tensor hflip(const Tensor& t) {
  const auto& d = t.dims();
  std::vector<float> out(t.data().begin(), t.data().end());
  for (std::size_t row = 0; row < std::size_t{d.c} * d.h; ++row) {
    auto first = out.begin() + static_cast<std::ptrdiff_t>(row * d.w);
    std::reverse(first, first + d.w);
  }
  return Tensor(d, std::move(out));
}

Tensor crop_center(const Tensor& t, std::uint32_t side) {
  const auto& d = t.dims();
  if (side == 0 || side > d.h || side > d.w) {
    throw Error(Errc::CropTooLarge, fmt::format("crop side {} on a {}x{} map", side, d.h, d.w));
  }
  const std::uint32_t y0 = (d.h - side) / 2;
  const std::uint32_t x0 = (d.w - side) / 2;
  std::vector<float> out;
  out.reserve(std::size_t{d.c} * side * side);
  for (std::uint32_t c = 0; c < d.c; ++c) {
    const auto plane = t.channel(c);
    for (std::uint32_t y = 0; y < side; ++y) {
      const auto row = plane.subspan(std::size_t{y0 + y} * d.w + x0, side);
      out.insert(out.end(), row.begin(), row.end());
    }
  }
  return Tensor({d.c, side, side}, std::move(out));
}

std::vector<float> average(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::ShapeMismatch, fmt::format("cannot average {} and {} values", a.size(), b.size()));
  }
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] + b[i]) * 0.5f;
  return out;
}

Tensor average(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    const auto& x = a.dims();
    const auto& y = b.dims();
    throw Error(Errc::ShapeMismatch,
                fmt::format("cannot average ({},{},{}) and ({},{},{})", x.c, x.h, x.w, y.c, y.h, y.w));
  }
  return Tensor(a.dims(), average(a.data(), b.data()));
}

Bytes encode_tensor(const Tensor& t) {
  ByteWriter w;
  w.text("TEN1");
  w.u32(t.dims().c);
  w.u32(t.dims().h);
  w.u32(t.dims().w);
  w.f32s(t.data());
  return w.take();
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("TEN1");
  Dims d;
  d.c = r.u32("channel count");
  d.h = r.u32("height");
  d.w = r.u32("width");
  auto values = r.f32s(d.size(), "tensor values");
  r.expect_end();
  return Tensor(d, std::move(values));
}

}  // namespace layerprobe
