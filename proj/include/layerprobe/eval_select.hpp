// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layerprobe/extraction.hpp"
#include "layerprobe/representation.hpp"
#include "layerprobe/svm.hpp"

namespace layerprobe {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

using SplitAssignment = std::map<std::string, Split>;

/// (TP/(TP+FN) + TN/(TN+FP)) / 2 over -1/+1 labels.
double balanced_accuracy(std::span<const std::int8_t> preds, std::span<const std::int8_t> truth);

struct SvmConfig {
  double C = 1.0;
  double eps = 0.1;
  std::uint32_t max_sweeps = 1000;
  double bias_scale = 1.0;
  bool class_weighted = true;  // inverse-prevalence weights
  bool l2norm = true;
  std::uint64_t seed = 0;
  std::size_t train_cap = 20000;
};

struct KindResult {
  std::string attribute;
  RepKind kind = RepKind::Spat3x3;
  SvmModel model;
  double ba_val = 0.0;
  double ba_test = 0.0;
};

/// Scales v to unit L2 norm; zero vectors are left unchanged.
void l2_normalize(std::span<float> v);

/// Seeded stratified draw of at most `cap` positions from `labels`, returned
/// in ascending order. Each class keeps round(cap * n_class / n) members
/// (at least one).
std::vector<std::size_t> stratified_subsample(std::span<const std::int8_t> labels, std::size_t cap,
                                              std::uint64_t seed);

/// Trains on the Train images (capped at config.train_cap) and scores Val and
/// Test. Every image named in `split` must have a feature vector and a label.
KindResult evaluate_kind(const FeatureCache& features, const std::map<std::string, std::int8_t>& labels,
                         const SplitAssignment& split, const SvmConfig& config, const std::string& attribute);

/// Argmax of ba_val; ties go to Spat3x3, then Spat1x1, FC1, FC2.
RepKind select_best(std::span<const KindResult> results);

using KindCounts = std::array<std::size_t, 4>;

KindCounts decomposition_report(std::span<const RepKind> selections);

struct AttributeScores {
  std::string attribute;
  std::array<double, 4> by_kind{};  // indexed by kind_index()
};

/// by_kind[k] - by_kind[Spat1x1] per attribute.
std::vector<AttributeScores> relative_report(std::span<const AttributeScores> scores);

// Reference accuracies (percent) for the 40 CelebA/LFWA attributes.

enum class Dataset { CelebA, LFWA };

struct ReferenceRow {
  std::string_view attribute;
  std::array<int, 3> celeba;  // baseline, LNet+ANet, ours
  std::array<int, 3> lfwa;
};

std::span<const ReferenceRow> reference_table();

enum class ReferenceMethod { Baseline = 0, LNetANet = 1, Ours = 2 };

double reference_mean(Dataset dataset, ReferenceMethod method);

struct ComparisonRow {
  std::string attribute;  // "mean" for the final row
  double baseline = 0.0;
  double lnet_anet = 0.0;
  double ours_ref = 0.0;
  std::optional<double> ours_measured;  // percent
};

/// One row per embedded attribute (embedded order) plus a trailing "mean"
/// row. `measured` maps attribute name to balanced accuracy in [0, 1];
/// attributes absent from it are left empty. Unknown names are rejected.
std::vector<ComparisonRow> reference_comparison(const std::map<std::string, double>& measured, Dataset dataset);

std::string format_table1(std::span<const ComparisonRow> rows);
std::string format_table3(const KindCounts& counts);
std::string format_fig3(std::span<const AttributeScores> deltas);

}  // namespace layerprobe
