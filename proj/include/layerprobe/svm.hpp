// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "layerprobe/binary_io.hpp"
#include "layerprobe/representation.hpp"

namespace layerprobe {

/// Dense row-major n x d matrix of training vectors.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// L1-loss (hinge) linear SVM, solved in the dual:
///   min_a 1/2 a'Qa - 1'a   s.t. 0 <= a_i <= C_i,
///   Q_ij = y_i y_j x_i'x_j  (x augmented with bias_scale when > 0),
///   C_i  = C * (weight_pos if y_i = +1 else weight_neg).
struct SvmProblem {
  FeatureMatrix x;
  std::vector<std::int8_t> y;  // -1 / +1
  double C = 1.0;
  double weight_pos = 1.0;
  double weight_neg = 1.0;
  double bias_scale = 1.0;  // 0 disables the bias term
  double eps = 0.1;         // stop when the max projected-gradient violation drops below this
  std::uint32_t max_sweeps = 1000;
  std::uint64_t seed = 0;
};

/// n / (2 n_pos), n / (2 n_neg).
std::pair<double, double> inverse_prevalence_weights(std::span<const std::int8_t> y);

struct SvmMeta {
  double C = 0.0;
  double eps = 0.0;
  std::uint32_t sweeps_used = 0;
  double final_violation = 0.0;
  bool converged = false;
};

struct SvmModel {
  std::vector<float> w;
  float b = 0.0f;
  SvmMeta meta;
};

/// State after one coordinate update, for instrumented runs.
struct DcdStep {
  std::uint32_t sweep = 0;
  std::size_t index = 0;
  double alpha_before = 0.0;
  double alpha_after = 0.0;
  std::span<const double> alpha;
  std::span<const double> upper;  // C_i
};

using DcdObserver = std::function<void(const DcdStep&)>;

/// Dual coordinate descent. Every sweep visits the coordinates in a fresh
/// permutation drawn from a generator seeded once with `seed`, so training is
/// a deterministic function of the problem. Convergence is declared only
/// when a full pass at the final w confirms the violation is below eps;
/// otherwise meta.converged is false after max_sweeps.
SvmModel train_dcd(const SvmProblem& problem, const DcdObserver& observer = {});

double decision_value(const SvmModel& model, std::span<const float> x);

/// sign(decision_value); an exact 0 maps to +1.
std::int8_t predict(const SvmModel& model, std::span<const float> x);

/// Text header line
///   svm d=<d> C=<C> b=<b> kind=<kind> attr=<name>\n
/// followed by d little-endian f32 weights.
struct SvmModelFile {
  SvmModel model;
  RepKind kind = RepKind::Spat3x3;
  std::string attribute;
};

Bytes encode_svm_model(const SvmModelFile& file);
SvmModelFile decode_svm_model(std::span<const std::uint8_t> bytes);

}  // namespace layerprobe
