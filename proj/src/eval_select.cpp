// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/eval_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <fmt/core.h>

#include "layerprobe/error.hpp"

namespace layerprobe {

double balanced_accuracy(std::span<const std::int8_t> preds, std::span<const std::int8_t> truth) {
  if (preds.size() != truth.size()) {
    throw Error(Errc::LengthMismatch, fmt::format("{} predictions for {} labels", preds.size(), truth.size()));
  }
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      (preds[i] == 1 ? tp : fn)++;
    } else {
      (preds[i] == 1 ? fp : tn)++;
    }
  }
  if (tp + fn == 0 || tn + fp == 0) {
    throw Error(Errc::SingleClassTruth, fmt::format("{} positives, {} negatives", tp + fn, tn + fp));
  }
  const double tar = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double trr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return (tar + trr) / 2.0;
}

void l2_normalize(std::span<float> v) {
  double ss = 0.0;
  for (float x : v) ss += static_cast<double>(x) * x;
  if (ss <= 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<std::size_t> stratified_subsample(std::span<const std::int8_t> labels, std::size_t cap,
                                              std::uint64_t seed) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= cap) return all;

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  auto take = [&](std::vector<std::size_t>& group, std::size_t k) {
    std::shuffle(group.begin(), group.end(), rng);
    group.resize(std::min(group.size(), k));
  };
  auto keep_pos = static_cast<std::size_t>(std::llround(static_cast<double>(cap) * pos.size() / n));
  keep_pos = std::clamp<std::size_t>(keep_pos, pos.empty() ? 0 : 1, std::min(pos.size(), cap));
  std::size_t keep_neg = cap - keep_pos;
  if (!neg.empty() && keep_neg == 0) {
    keep_neg = 1;
    --keep_pos;
  }
  take(pos, keep_pos);
  take(neg, keep_neg);
  std::vector<std::size_t> out(pos);
  out.insert(out.end(), neg.begin(), neg.end());
  std::sort(out.begin(), out.end());
  return out;
}

KindResult evaluate_kind(const FeatureCache& features, const std::map<std::string, std::int8_t>& labels,
                         const SplitAssignment& split, const SvmConfig& config, const std::string& attribute) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  row_of.reserve(features.ids.size());
  for (std::size_t i = 0; i < features.ids.size(); ++i) row_of.emplace(features.ids[i], i);

  std::array<std::vector<std::size_t>, 3> rows;
  std::array<std::vector<std::int8_t>, 3> truth;
  for (const auto& [id, part] : split) {
    auto f = row_of.find(id);
    if (f == row_of.end()) throw Error(Errc::MissingFeature, id);
    auto l = labels.find(id);
    if (l == labels.end()) throw Error(Errc::MissingFeature, fmt::format("{}: no label for {}", id, attribute));
    rows[static_cast<int>(part)].push_back(f->second);
    truth[static_cast<int>(part)].push_back(l->second);
  }

  auto vector_of = [&](std::size_t row) {
    std::vector<float> v = features.vectors[row];
    if (config.l2norm) l2_normalize(v);
    return v;
  };

  const auto& train_rows = rows[0];
  const auto& train_y = truth[0];
  const auto pick = stratified_subsample(train_y, config.train_cap, config.seed);

  SvmProblem problem;
  problem.x = FeatureMatrix(pick.size(), features.dim);
  problem.y.reserve(pick.size());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    const auto v = vector_of(train_rows[pick[i]]);
    std::copy(v.begin(), v.end(), problem.x.row(i).begin());
    problem.y.push_back(train_y[pick[i]]);
  }
  if (std::count(problem.y.begin(), problem.y.end(), 1) == 0 ||
      std::count(problem.y.begin(), problem.y.end(), -1) == 0) {
    throw Error(Errc::SingleClass, fmt::format("{} / {}: train split has one class", attribute, kind_tag(features.kind)));
  }
  problem.C = config.C;
  problem.eps = config.eps;
  problem.max_sweeps = config.max_sweeps;
  problem.bias_scale = config.bias_scale;
  problem.seed = config.seed;
  if (config.class_weighted) std::tie(problem.weight_pos, problem.weight_neg) = inverse_prevalence_weights(problem.y);

  KindResult result;
  result.attribute = attribute;
  result.kind = features.kind;
  result.model = train_dcd(problem);

  auto score = [&](int part) {
    std::vector<std::int8_t> preds;
    preds.reserve(rows[part].size());
    for (auto r : rows[part]) preds.push_back(predict(result.model, vector_of(r)));
    try {
      return balanced_accuracy(preds, truth[part]);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{} {} split: {}", attribute, part == 1 ? "val" : "test", e.context()));
    }
  };
  result.ba_val = score(1);
  result.ba_test = score(2);
  return result;
}

RepKind select_best(std::span<const KindResult> results) {
  std::array<const KindResult*, 4> by_kind{};
  for (const auto& r : results) {
    auto& slot = by_kind[kind_index(r.kind)];
    if (slot) throw Error(Errc::InvalidArgument, fmt::format("two results for {}", kind_tag(r.kind)));
    slot = &r;
  }
  for (auto k : kAllKinds) {
    if (!by_kind[kind_index(k)]) throw Error(Errc::MissingKind, std::string(kind_tag(k)));
  }
  RepKind best = kAllKinds[0];
  for (auto k : kAllKinds) {
    if (by_kind[kind_index(k)]->ba_val > by_kind[kind_index(best)]->ba_val) best = k;
  }
  return best;
}

KindCounts decomposition_report(std::span<const RepKind> selections) {
  KindCounts counts{};
  for (auto k : selections) ++counts[kind_index(k)];
  return counts;
}

std::vector<AttributeScores> relative_report(std::span<const AttributeScores> scores) {
  std::vector<AttributeScores> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    for (double v : s.by_kind) {
      if (!std::isfinite(v)) throw Error(Errc::MissingKind, fmt::format("{}: missing or non-finite score", s.attribute));
    }
    AttributeScores d{s.attribute, {}};
    const double ref = s.by_kind[kind_index(RepKind::Spat1x1)];
    for (auto k : kAllKinds) d.by_kind[kind_index(k)] = s.by_kind[kind_index(k)] - ref;
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

// Percent accuracies per attribute: {baseline, LNet+ANet, ours} on CelebA then LFWA.
constexpr std::array<ReferenceRow, 40> kReference = {{
    {"5_o_Clock_Shadow", {86, 91, 89}, {78, 84, 77}},
    {"Arched_Eyebrows", {75, 79, 83}, {66, 82, 83}},
    {"Attractive", {79, 81, 82}, {75, 83, 79}},
    {"Bags_Under_Eyes", {77, 79, 79}, {72, 83, 83}},
    {"Bald", {92, 98, 96}, {86, 88, 91}},
    {"Bangs", {94, 95, 94}, {84, 88, 91}},
    {"Big_Lips", {63, 68, 70}, {70, 75, 78}},
    {"Big_Nose", {74, 78, 79}, {73, 81, 83}},
    {"Black_Hair", {77, 88, 87}, {82, 90, 90}},
    {"Blond_Hair", {86, 95, 93}, {90, 97, 97}},
    {"Blurry", {83, 84, 87}, {75, 74, 88}},
    {"Brown_Hair", {74, 80, 79}, {71, 77, 76}},
    {"Bushy_Eyebrows", {80, 90, 87}, {69, 82, 83}},
    {"Chubby", {86, 91, 88}, {68, 73, 75}},
    {"Double_Chin", {90, 92, 89}, {70, 78, 80}},
    {"Eyeglasses", {96, 99, 99}, {88, 95, 91}},
    {"Goatee", {92, 95, 94}, {68, 78, 83}},
    {"Gray_Hair", {93, 97, 95}, {82, 84, 87}},
    {"Heavy_Makeup", {87, 90, 91}, {89, 95, 95}},
    {"High_Cheekbones", {85, 87, 87}, {79, 88, 88}},
    {"Male", {95, 98, 99}, {91, 94, 94}},
    {"Mouth_Slightly_Open", {85, 92, 92}, {76, 82, 81}},
    {"Mustache", {87, 95, 93}, {79, 92, 94}},
    {"Narrow_Eyes", {83, 81, 78}, {74, 81, 81}},
    {"No_Beard", {91, 95, 94}, {69, 79, 80}},
    {"Oval_Face", {65, 66, 67}, {66, 74, 75}},
    {"Pale_Skin", {89, 91, 85}, {68, 84, 73}},
    {"Pointy_Nose", {67, 72, 73}, {72, 80, 83}},
    {"Receding_Hairline", {84, 89, 87}, {70, 85, 86}},
    {"Rosy_Cheeks", {85, 90, 88}, {71, 78, 82}},
    {"Sideburns", {94, 96, 95}, {72, 77, 82}},
    {"Smiling", {92, 92, 92}, {82, 91, 90}},
    {"Straight_Hair", {70, 73, 73}, {72, 76, 77}},
    {"Wavy_Hair", {79, 80, 79}, {65, 76, 77}},
    {"Wearing_Earrings", {77, 82, 82}, {87, 94, 94}},
    {"Wearing_Hat", {93, 99, 96}, {82, 88, 90}},
    {"Wearing_Lipstick", {91, 93, 93}, {86, 95, 95}},
    {"Wearing_Necklace", {70, 71, 73}, {81, 88, 90}},
    {"Wearing_Necktie", {90, 93, 91}, {72, 79, 81}},
    {"Young", {81, 87, 86}, {79, 86, 86}},
}};

const std::array<int, 3>& columns(const ReferenceRow& row, Dataset d) { return d == Dataset::CelebA ? row.celeba : row.lfwa; }

}  // namespace

std::span<const ReferenceRow> reference_table() { return kReference; }

double reference_mean(Dataset dataset, ReferenceMethod method) {
  double sum = 0.0;
  for (const auto& row : kReference) sum += columns(row, dataset)[static_cast<int>(method)];
  return sum / static_cast<double>(kReference.size());
}

std::vector<ComparisonRow> reference_comparison(const std::map<std::string, double>& measured, Dataset dataset) {
  for (const auto& [name, ba] : measured) {
    const bool known = std::any_of(kReference.begin(), kReference.end(),
                                   [&](const ReferenceRow& r) { return r.attribute == name; });
    if (!known) throw Error(Errc::UnknownAttribute, name);
  }
  std::vector<ComparisonRow> rows;
  double measured_sum = 0.0;
  std::size_t measured_count = 0;
  for (const auto& ref : kReference) {
    const auto& c = columns(ref, dataset);
    ComparisonRow row{std::string(ref.attribute), double(c[0]), double(c[1]), double(c[2]), std::nullopt};
    if (auto it = measured.find(row.attribute); it != measured.end()) {
      row.ours_measured = it->second * 100.0;
      measured_sum += *row.ours_measured;
      ++measured_count;
    }
    rows.push_back(std::move(row));
  }
  ComparisonRow mean{"mean", reference_mean(dataset, ReferenceMethod::Baseline),
                     reference_mean(dataset, ReferenceMethod::LNetANet), reference_mean(dataset, ReferenceMethod::Ours),
                     std::nullopt};
  if (measured_count) mean.ours_measured = measured_sum / static_cast<double>(measured_count);
  rows.push_back(std::move(mean));
  return rows;
}

std::string format_table1(std::span<const ComparisonRow> rows) {
  std::string out = "attribute\tbaseline\tlnet_anet\tours_ref\tours_measured\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{:.1f}\t{:.1f}\t{:.1f}\t{}\n", r.attribute, r.baseline, r.lnet_anet, r.ours_ref,
                       r.ours_measured ? fmt::format("{:.1f}", *r.ours_measured) : std::string("NA"));
  }
  return out;
}

std::string format_table3(const KindCounts& counts) {
  std::string out = "kind\tcount\n";
  for (auto k : kAllKinds) out += fmt::format("{}\t{}\n", kind_tag(k), counts[kind_index(k)]);
  return out;
}

std::string format_fig3(std::span<const AttributeScores> deltas) {
  std::string out = "attribute\tkind\tdelta\n";
  for (const auto& d : deltas) {
    for (auto k : kAllKinds) out += fmt::format("{}\t{}\t{:.6f}\n", d.attribute, kind_tag(k), d.by_kind[kind_index(k)]);
  }
  return out;
}

}  // namespace layerprobe
