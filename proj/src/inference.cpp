// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "layerprobe/error.hpp"

namespace layerprobe {

namespace {

std::string dims_str(const Dims& d) { return fmt::format("({},{},{})", d.c, d.h, d.w); }

// Output positions x whose input column x*stride - pad + offset lies in [0, extent).
std::pair<std::uint32_t, std::uint32_t> valid_range(std::uint32_t out_extent, std::uint32_t extent,
                                                    std::uint32_t stride, std::int64_t shift) {
  std::int64_t lo = 0;
  if (shift < 0) lo = (-shift + stride - 1) / stride;
  std::int64_t hi = (std::int64_t{extent} - 1 - shift);
  hi = hi < 0 ? 0 : hi / stride + 1;
  hi = std::min<std::int64_t>(hi, out_extent);
  if (lo > hi) lo = hi;
  return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Parameter& kernel, std::span<const float> bias, std::uint32_t stride,
              std::uint32_t pad) {
  const auto& d = input.dims();
  if (kernel.shape.size() != 4 || kernel.shape[1] != d.c) {
    throw Error(Errc::ShapeMismatch, fmt::format("conv kernel does not match input {}", dims_str(d)));
  }
  const std::uint32_t outc = kernel.shape[0], kh = kernel.shape[2], kw = kernel.shape[3];
  if (bias.size() != outc || stride == 0) {
    throw Error(Errc::ShapeMismatch, fmt::format("conv bias has {} values for {} outputs", bias.size(), outc));
  }
  const std::int64_t span_h = std::int64_t{d.h} + 2 * std::int64_t{pad} - kh;
  const std::int64_t span_w = std::int64_t{d.w} + 2 * std::int64_t{pad} - kw;
  if (span_h < 0 || span_w < 0) {
    throw Error(Errc::ShapeMismatch, fmt::format("conv kernel {}x{} larger than padded input {}", kh, kw, dims_str(d)));
  }
  const std::uint32_t oh = static_cast<std::uint32_t>(span_h / stride + 1);
  const std::uint32_t ow = static_cast<std::uint32_t>(span_w / stride + 1);
  const std::size_t plane = std::size_t{oh} * ow;

  std::vector<float> out(outc * plane);
  std::vector<double> acc(plane);
  const auto in = input.data();
  for (std::uint32_t o = 0; o < outc; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(bias[o]));
    for (std::uint32_t c = 0; c < d.c; ++c) {
      const float* src = in.data() + std::size_t{c} * d.h * d.w;
      for (std::uint32_t i = 0; i < kh; ++i) {
        const auto [ylo, yhi] = valid_range(oh, d.h, stride, std::int64_t{i} - pad);
        for (std::uint32_t j = 0; j < kw; ++j) {
          const double k = kernel.values[((std::size_t{o} * d.c + c) * kh + i) * kw + j];
          const auto [xlo, xhi] = valid_range(ow, d.w, stride, std::int64_t{j} - pad);
          for (std::uint32_t y = ylo; y < yhi; ++y) {
            const float* row = src + (std::size_t{y} * stride + i - pad) * d.w;
            double* dst = acc.data() + std::size_t{y} * ow;
            for (std::uint32_t x = xlo; x < xhi; ++x) dst[x] += k * row[std::size_t{x} * stride + j - pad];
          }
        }
      }
    }
    std::transform(acc.begin(), acc.end(), out.begin() + static_cast<std::ptrdiff_t>(o * plane),
                   [](double v) { return static_cast<float>(v); });
  }
  return Tensor({outc, oh, ow}, std::move(out));
}

Tensor maxpool2d(const Tensor& input, std::uint32_t kernel, std::uint32_t stride, bool ceil_mode) {
  const auto& d = input.dims();
  if (kernel == 0 || stride == 0 || kernel > d.h || kernel > d.w) {
    throw Error(Errc::ShapeMismatch, fmt::format("pool kernel {} on input {}", kernel, dims_str(d)));
  }
  auto extent = [&](std::uint32_t n) {
    const std::uint32_t span = n - kernel;
    return (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
  };
  const std::uint32_t oh = extent(d.h), ow = extent(d.w);
  if ((oh - 1) * stride >= d.h || (ow - 1) * stride >= d.w) {
    throw Error(Errc::ShapeMismatch,
                fmt::format("pool kernel {} stride {} leaves an empty window on input {}", kernel, stride, dims_str(d)));
  }
  std::vector<float> out;
  out.reserve(std::size_t{d.c} * oh * ow);
  for (std::uint32_t c = 0; c < d.c; ++c) {
    const auto src = input.channel(c);
    for (std::uint32_t y = 0; y < oh; ++y) {
      const std::uint32_t y0 = y * stride, y1 = std::min(y0 + kernel, d.h);
      for (std::uint32_t x = 0; x < ow; ++x) {
        const std::uint32_t x0 = x * stride, x1 = std::min(x0 + kernel, d.w);
        float m = src[std::size_t{y0} * d.w + x0];
        for (std::uint32_t yy = y0; yy < y1; ++yy) {
          for (std::uint32_t xx = x0; xx < x1; ++xx) m = std::max(m, src[std::size_t{yy} * d.w + xx]);
        }
        out.push_back(m);
      }
    }
  }
  return Tensor({d.c, oh, ow}, std::move(out));
}

Tensor prelu(const Tensor& input, std::span<const float> slopes) {
  const auto& d = input.dims();
  if (slopes.size() != d.c && slopes.size() != 1) {
    throw Error(Errc::ShapeMismatch, fmt::format("{} PReLU slopes for {} channels", slopes.size(), d.c));
  }
  const std::size_t plane = std::size_t{d.h} * d.w;
  std::vector<float> out(input.data().begin(), input.data().end());
  for (std::uint32_t c = 0; c < d.c; ++c) {
    const float a = slopes.size() == 1 ? slopes[0] : slopes[c];
    for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
      if (!(out[i] > 0.0f)) out[i] *= a;
    }
  }
  return Tensor(d, std::move(out));
}

Tensor fully_connected(const Tensor& input, const Parameter& weight, std::span<const float> bias) {
  const auto x = input.data();
  if (weight.shape.size() != 2 || weight.shape[1] != x.size() || bias.size() != weight.shape[0]) {
    throw Error(Errc::ShapeMismatch, fmt::format("fully connected layer does not accept {} inputs", x.size()));
  }
  const std::uint32_t outn = weight.shape[0];
  std::vector<float> out(outn);
  for (std::uint32_t o = 0; o < outn; ++o) {
    const float* row = weight.values.data() + std::size_t{o} * x.size();
    double acc = bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(row[i]) * x[i];
    out[o] = static_cast<float>(acc);
  }
  return Tensor({outn, 1, 1}, std::move(out));
}

std::vector<float> softmax(std::span<const float> v) {
  if (v.empty()) return {};
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> e(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += (e[i] = std::exp(v[i] - m));
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(e[i] / sum);
  return out;
}

std::vector<BinRange> adaptive_bins(std::uint32_t extent, std::uint32_t side) {
  std::vector<BinRange> bins(side);
  for (std::uint32_t i = 0; i < side; ++i) {
    bins[i].begin = static_cast<std::uint32_t>(std::uint64_t{i} * extent / side);
    bins[i].end = static_cast<std::uint32_t>(std::uint64_t{i + 1} * extent / side);
  }
  return bins;
}

Tensor adaptive_maxpool(const Tensor& input, std::uint32_t side) {
  const auto& d = input.dims();
  if (side == 0 || side > d.h || side > d.w) {
    throw Error(Errc::OutputLargerThanInput, fmt::format("{}x{} output from input {}", side, side, dims_str(d)));
  }
  const auto rows = adaptive_bins(d.h, side);
  const auto cols = adaptive_bins(d.w, side);
  std::vector<float> out;
  out.reserve(std::size_t{d.c} * side * side);
  for (std::uint32_t c = 0; c < d.c; ++c) {
    const auto src = input.channel(c);
    for (const auto& r : rows) {
      for (const auto& q : cols) {
        float m = src[std::size_t{r.begin} * d.w + q.begin];
        for (auto y = r.begin; y < r.end; ++y) {
          for (auto x = q.begin; x < q.end; ++x) m = std::max(m, src[std::size_t{y} * d.w + x]);
        }
        out.push_back(m);
      }
    }
  }
  return Tensor({d.c, side, side}, std::move(out));
}

namespace {

Tensor run_layer(const Model& model, const LayerDesc& layer, const Tensor& x) {
  if (const auto* c = std::get_if<Conv2D>(&layer.op)) {
    return conv2d(x, model.param(layer.name + ".weight"), model.param(layer.name + ".bias").values, c->stride,
                  c->pad);
  }
  if (const auto* p = std::get_if<MaxPool2D>(&layer.op)) return maxpool2d(x, p->kernel, p->stride, p->ceil_mode);
  if (std::holds_alternative<PReLU>(layer.op)) return prelu(x, model.param(layer.name + ".slope").values);
  if (std::holds_alternative<FullyConnected>(layer.op)) {
    return fully_connected(x, model.param(layer.name + ".weight"), model.param(layer.name + ".bias").values);
  }
  return x;  // Dropout, Softmax
}

}  // namespace

std::vector<Tensor> forward_all(const Model& model, const Tensor& input) {
  const auto& spec = model.spec();
  if (input.dims() != spec.input) {
    throw Error(Errc::ShapeMismatch,
                fmt::format("input {} but model expects {}", dims_str(input.dims()), dims_str(spec.input)));
  }
  std::vector<Tensor> outs;
  outs.reserve(spec.layers.size());
  const Tensor* cur = &input;
  for (const auto& layer : spec.layers) {
    outs.push_back(run_layer(model, layer, *cur));
    cur = &outs.back();
  }
  return outs;
}

ForwardResult forward_with_taps(const Model& model, const Tensor& input) {
  const auto& spec = model.spec();
  if (input.dims() != spec.input) {
    throw Error(Errc::ShapeMismatch,
                fmt::format("input {} but model expects {}", dims_str(input.dims()), dims_str(spec.input)));
  }
  ForwardResult result;
  Tensor cur = input;
  for (const auto& layer : spec.layers) {
    if (!std::holds_alternative<Softmax>(layer.op) && !std::holds_alternative<Dropout>(layer.op)) {
      cur = run_layer(model, layer, cur);
    }
    for (const auto& [kind, name] : spec.taps) {
      if (name == layer.name) result.taps.insert_or_assign(name, cur);
    }
  }
  result.output.assign(cur.data().begin(), cur.data().end());
  return result;
}

}  // namespace layerprobe
