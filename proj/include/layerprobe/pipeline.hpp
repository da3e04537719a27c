// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "layerprobe/eval_select.hpp"
#include "layerprobe/representation.hpp"

namespace layerprobe {

// File-to-file stages behind the `layerprobe` subcommands. Each stage reads
// only its inputs and writes its outputs atomically under `out`.

/// Number of workers: explicit value if > 0, else $LAYERPROBE_THREADS, else 1.
unsigned resolve_threads(unsigned requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first failure
/// (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

std::vector<RepKind> parse_kinds(const std::string& csv);

struct ExtractOptions {
  std::filesystem::path model;
  std::filesystem::path weights;
  std::filesystem::path images;
  std::filesystem::path landmarks;
  std::filesystem::path out;
  std::uint32_t crop = 112;
  std::uint32_t canvas = 120;
  std::vector<RepKind> kinds{kAllKinds.begin(), kAllKinds.end()};
  unsigned threads = 0;
};

/// Writes <out>/<kind>.fea for every requested kind. Images are processed in
/// landmark-file (sorted id) order.
void run_extract(const ExtractOptions& opt);

struct TrainOptions {
  std::filesystem::path feats;
  std::filesystem::path attrs;
  std::filesystem::path partition;
  std::filesystem::path out;
  SvmConfig svm;
  std::vector<RepKind> kinds{kAllKinds.begin(), kAllKinds.end()};
  unsigned threads = 0;
};

/// Writes <out>/models/<attr>.<kind>.svm and <out>/kind_results.tsv.
void run_train(const TrainOptions& opt);

struct KindResultRow {
  std::string attribute;
  RepKind kind = RepKind::Spat3x3;
  double ba_val = 0.0;
  double ba_test = 0.0;
  std::uint32_t sweeps = 0;
  double violation = 0.0;
  bool converged = false;
};

std::string format_kind_results(const std::vector<KindResultRow>& rows);
std::vector<KindResultRow> parse_kind_results(std::string_view tsv);

struct SelectOptions {
  std::filesystem::path results;  // kind_results.tsv
  std::filesystem::path out;
};

/// Writes selection.tsv, table3.tsv, fig3.tsv and summary.txt.
void run_select(const SelectOptions& opt);

struct SelectionRow {
  std::string attribute;
  RepKind best = RepKind::Spat3x3;
  double best_ba_test = 0.0;
  std::array<double, 4> ba_val{};
  std::array<double, 4> ba_test{};
};

std::string format_selection(const std::vector<SelectionRow>& rows);
std::vector<SelectionRow> parse_selection(std::string_view tsv);

struct ReportOptions {
  std::filesystem::path selection;
  std::filesystem::path out;
  Dataset dataset = Dataset::CelebA;
};

/// Writes table1.tsv comparing measured best-kind test accuracy with the
/// embedded reference table.
void run_report(const ReportOptions& opt);

/// Prints the shape plan (one `<layer> <kind> C H W` line per layer) and, when
/// a weight blob is given, checks it against the plan.
std::string run_verify_model(const std::filesystem::path& manifest, const std::filesystem::path& weights);

}  // namespace layerprobe
