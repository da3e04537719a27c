// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/core.h>

#include "layerprobe/error.hpp"
#include "layerprobe/text.hpp"

namespace layerprobe {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(Errc::DimMismatch, fmt::format("{}x{} matrix from {} values", rows, cols, data_.size()));
  }
}

std::pair<double, double> inverse_prevalence_weights(std::span<const std::int8_t> y) {
  const auto pos = std::count(y.begin(), y.end(), std::int8_t{1});
  const auto neg = static_cast<std::ptrdiff_t>(y.size()) - pos;
  if (pos == 0 || neg == 0) throw Error(Errc::SingleClass, fmt::format("{} positives, {} negatives", pos, neg));
  const double n = static_cast<double>(y.size());
  return {n / (2.0 * pos), n / (2.0 * neg)};
}

namespace {

void validate(const SvmProblem& p) {
  const auto n = p.x.rows();
  if (p.y.size() != n) throw Error(Errc::DimMismatch, fmt::format("{} labels for {} rows", p.y.size(), n));
  if (n < 2) throw Error(Errc::SingleClass, "need at least two training vectors");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.y[i] == 1) {
      pos = true;
    } else if (p.y[i] == -1) {
      neg = true;
    } else {
      throw Error(Errc::InvalidArgument, fmt::format("label {} at row {} is not -1/+1", int{p.y[i]}, i));
    }
  }
  if (!pos || !neg) throw Error(Errc::SingleClass, "training labels contain one class");
  if (!(p.C > 0.0) || !std::isfinite(p.C)) throw Error(Errc::InvalidArgument, "C must be positive");
  if (!(p.weight_pos > 0.0) || !(p.weight_neg > 0.0)) throw Error(Errc::InvalidArgument, "class weights must be positive");
  if (!(p.bias_scale >= 0.0)) throw Error(Errc::InvalidArgument, "bias scale must be >= 0");
  for (std::size_t i = 0; i < n; ++i) {
    for (float v : p.x.row(i)) {
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteFeature, fmt::format("row {}", i));
    }
  }
}

double projected(double g, double alpha, double upper) {
  if (alpha <= 0.0) return std::min(g, 0.0);
  if (alpha >= upper) return std::max(g, 0.0);
  return g;
}

}  // namespace

SvmModel train_dcd(const SvmProblem& p, const DcdObserver& observer) {
  validate(p);
  const std::size_t n = p.x.rows(), d = p.x.cols();
  const double bias = p.bias_scale;

  std::vector<double> w(d, 0.0);
  double wb = 0.0;  // weight on the augmented constant feature
  std::vector<double> alpha(n, 0.0), upper(n), qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    upper[i] = p.C * (p.y[i] == 1 ? p.weight_pos : p.weight_neg);
    double s = bias * bias;
    for (float v : p.x.row(i)) s += static_cast<double>(v) * v;
    qd[i] = s;
  }

  auto gradient = [&](std::size_t i) {
    const auto xi = p.x.row(i);
    double dot = wb * bias;
    for (std::size_t k = 0; k < d; ++k) dot += w[k] * xi[k];
    return p.y[i] * dot - 1.0;
  };
  auto full_violation = [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(projected(gradient(i), alpha[i], upper[i])));
    return worst;
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(p.seed);

  SvmMeta meta{p.C, p.eps, 0, 0.0, false};
  while (meta.sweeps_used < p.max_sweeps) {
    std::shuffle(order.begin(), order.end(), rng);
    ++meta.sweeps_used;
    double sweep_max = 0.0;
    for (const auto i : order) {
      const double g = gradient(i);
      const double pg = projected(g, alpha[i], upper[i]);
      sweep_max = std::max(sweep_max, std::abs(pg));
      if (pg == 0.0) continue;

      const double old = alpha[i];
      const double next = qd[i] > 0.0 ? std::clamp(old - g / qd[i], 0.0, upper[i]) : (g < 0.0 ? upper[i] : 0.0);
      if (next == old) continue;
      alpha[i] = next;
      const double step = (next - old) * p.y[i];
      const auto xi = p.x.row(i);
      for (std::size_t k = 0; k < d; ++k) w[k] += step * xi[k];
      wb += step * bias;
      if (observer) observer({meta.sweeps_used, i, old, next, alpha, upper});
    }
    if (sweep_max < p.eps) {
      meta.final_violation = full_violation();
      if (meta.final_violation < p.eps) {
        meta.converged = true;
        break;
      }
    }
  }
  if (!meta.converged) meta.final_violation = full_violation();

  SvmModel model;
  model.w.resize(d);
  std::transform(w.begin(), w.end(), model.w.begin(), [](double v) { return static_cast<float>(v); });
  model.b = static_cast<float>(bias * wb);
  model.meta = meta;
  return model;
}

double decision_value(const SvmModel& model, std::span<const float> x) {
  if (x.size() != model.w.size()) {
    throw Error(Errc::DimMismatch, fmt::format("{} features for a {}-dim model", x.size(), model.w.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) acc += static_cast<double>(model.w[k]) * x[k];
  return acc + model.b;
}

std::int8_t predict(const SvmModel& model, std::span<const float> x) {
  return decision_value(model, x) >= 0.0 ? std::int8_t{1} : std::int8_t{-1};
}

Bytes encode_svm_model(const SvmModelFile& file) {
  const auto& attr = file.attribute;
  if (attr.empty() || attr.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(Errc::InvalidArgument, fmt::format("attribute name \"{}\" must be non-empty without whitespace", attr));
  }
  ByteWriter w;
  w.text(fmt::format("svm d={} C={} b={} kind={} attr={}\n", file.model.w.size(),
                     text::format_double(file.model.meta.C), text::format_float(file.model.b), kind_tag(file.kind),
                     attr));
  w.f32s(file.model.w);
  return w.take();
}

SvmModelFile decode_svm_model(std::span<const std::uint8_t> bytes) {
  const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (nl == bytes.end()) throw Error(Errc::BadHeader, "offset 0: no header line");
  const std::string header(bytes.begin(), nl);
  const auto tok = text::fields(header);
  if (tok.size() != 6 || tok[0] != "svm") throw Error(Errc::BadHeader, "offset 0: expected \"svm d= C= b= kind= attr=\"");

  auto value = [&](std::size_t i, std::string_view key) {
    if (!tok[i].starts_with(key) || tok[i].size() <= key.size()) {
      throw Error(Errc::BadHeader, fmt::format("offset 0: field {} should be {}<value>", i, key));
    }
    return tok[i].substr(key.size());
  };
  SvmModelFile out;
  const auto dim = text::parse_u32(value(1, "d="));
  const auto c = text::parse_double(value(2, "C="));
  const auto b = text::parse_float(value(3, "b="));
  const auto kind = kind_from_tag(value(4, "kind="));
  if (!dim || !c || !b || !kind) throw Error(Errc::BadHeader, "offset 0: malformed header value");
  out.attribute = std::string(value(5, "attr="));
  out.kind = *kind;
  out.model.b = *b;
  out.model.meta.C = *c;

  ByteReader r(bytes);
  r.text(header.size() + 1, "header");
  out.model.w = r.f32s(*dim, "weights");
  r.expect_end();
  if (std::any_of(out.model.w.begin(), out.model.w.end(), [](float v) { return !std::isfinite(v); })) {
    throw Error(Errc::NonFiniteWeight, "svm weights");
  }
  return out;
}

}  // namespace layerprobe
