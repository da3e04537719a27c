// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/core.h>

#include "layerprobe/data_ingest.hpp"
#include "layerprobe/error.hpp"
#include "layerprobe/extraction.hpp"
#include "layerprobe/model.hpp"
#include "layerprobe/text.hpp"

namespace layerprobe {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LAYERPROBE_THREADS")) {
    if (auto v = text::parse_u32(env); v && *v > 0) return *v;
  }
  return 1;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<RepKind> parse_kinds(const std::string& csv) {
  std::vector<RepKind> kinds;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string::npos) end = csv.size();
    const auto tag = text::trim(std::string_view(csv).substr(start, end - start));
    auto k = kind_from_tag(tag);
    if (!k) throw Error(Errc::InvalidArgument, fmt::format("unknown kind \"{}\" (use spat3,spat1,fc1,fc2)", tag));
    if (std::find(kinds.begin(), kinds.end(), *k) != kinds.end()) {
      throw Error(Errc::InvalidArgument, fmt::format("kind \"{}\" listed twice", tag));
    }
    kinds.push_back(*k);
    start = end + 1;
  }
  std::sort(kinds.begin(), kinds.end());
  return kinds;
}

namespace {

std::filesystem::path cache_path(const std::filesystem::path& dir, RepKind k) {
  return dir / fmt::format("{}.fea", kind_tag(k));
}

// Prefix errors with the file they came from.
template <class F>
auto with_file(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::IoError) throw;
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.context()));
  }
}

std::string fmt_real(double v) { return text::format_double(v); }

double parse_real(std::string_view s, std::size_t line) {
  auto v = text::parse_double(s);
  if (!v) throw Error(Errc::NonNumeric, fmt::format("line {}: \"{}\"", line, s));
  return *v;
}

RepKind parse_kind_field(std::string_view s, std::size_t line) {
  auto k = kind_from_tag(s);
  if (!k) throw Error(Errc::SyntaxError, fmt::format("line {}: unknown kind \"{}\"", line, s));
  return *k;
}

}  // namespace

void run_extract(const ExtractOptions& opt) {
  const auto spec = with_file(opt.model, [&] { return parse_manifest(read_text_file(opt.model)); });
  const auto model = with_file(opt.weights, [&] { return load_weights(spec, read_file(opt.weights)); });
  for (auto k : opt.kinds) {
    if (!spec.taps.count(k)) {
      throw Error(Errc::BadTap, fmt::format("{}: no tap declared for {}", opt.model.string(), kind_tag(k)));
    }
  }
  const auto lms = with_file(opt.landmarks, [&] { return parse_landmarks(read_text_file(opt.landmarks)); });
  const auto templ = canonical_template(opt.canvas);

  std::vector<std::pair<std::string, Landmarks>> items(lms.begin(), lms.end());
  std::vector<RepresentationSet> sets(items.size());
  parallel_for(items.size(), resolve_threads(opt.threads), [&](std::size_t i) {
    const auto& [id, lm] = items[i];
    const auto image = read_pnm(opt.images / id);
    try {
      const auto aligned = align_similarity(image, lm, templ, opt.canvas);
      sets[i] = extract_representation_set(model, aligned, opt.crop, id);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}: {}", id, e.context()));
    }
  });

  std::filesystem::create_directories(opt.out);
  for (auto k : opt.kinds) cache_write(cache_path(opt.out, k), sets, k);
}

std::string format_kind_results(const std::vector<KindResultRow>& rows) {
  std::string out = "attribute\tkind\tba_val\tba_test\tsweeps\tviolation\tconverged\n";
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.attribute, kind_tag(r.kind), fmt_real(r.ba_val),
                       fmt_real(r.ba_test), r.sweeps, fmt_real(r.violation), r.converged ? 1 : 0);
  }
  return out;
}

std::vector<KindResultRow> parse_kind_results(std::string_view tsv) {
  const auto all = text::lines(tsv);
  if (all.empty() || text::fields(all[0]).size() != 7 || text::fields(all[0])[0] != "attribute") {
    throw Error(Errc::BadHeader, "line 1: expected kind_results header");
  }
  std::vector<KindResultRow> rows;
  for (std::size_t n = 1; n < all.size(); ++n) {
    const auto line = n + 1;
    const auto tok = text::fields(all[n]);
    if (tok.empty()) continue;
    if (tok.size() != 7) throw Error(Errc::FieldCount, fmt::format("line {}: {} fields, expected 7", line, tok.size()));
    KindResultRow r;
    r.attribute = std::string(tok[0]);
    r.kind = parse_kind_field(tok[1], line);
    r.ba_val = parse_real(tok[2], line);
    r.ba_test = parse_real(tok[3], line);
    auto sweeps = text::parse_u32(tok[4]);
    if (!sweeps) throw Error(Errc::NonNumeric, fmt::format("line {}: sweeps \"{}\"", line, tok[4]));
    r.sweeps = *sweeps;
    r.violation = parse_real(tok[5], line);
    if (tok[6] != "0" && tok[6] != "1") throw Error(Errc::SyntaxError, fmt::format("line {}: converged flag", line));
    r.converged = tok[6] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

void run_train(const TrainOptions& opt) {
  const auto table = with_file(opt.attrs, [&] { return parse_attributes(read_text_file(opt.attrs)); });
  const auto split = with_file(opt.partition, [&] { return parse_partition(read_text_file(opt.partition)); });
  std::vector<FeatureCache> caches;
  for (auto k : opt.kinds) {
    caches.push_back(cache_read(cache_path(opt.feats, k)));
    if (caches.back().kind != k) {
      throw Error(Errc::BadMagic, fmt::format("{}: holds kind {}", cache_path(opt.feats, k).string(),
                                              kind_tag(caches.back().kind)));
    }
  }

  const std::size_t n_attr = table.attribute_names.size();
  std::vector<std::map<std::string, std::int8_t>> columns(n_attr);
  for (std::size_t a = 0; a < n_attr; ++a) columns[a] = table.column(a);

  const std::size_t n_tasks = n_attr * caches.size();
  std::vector<KindResult> results(n_tasks);
  parallel_for(n_tasks, resolve_threads(opt.threads), [&](std::size_t t) {
    const std::size_t a = t / caches.size(), k = t % caches.size();
    results[t] = evaluate_kind(caches[k], columns[a], split, opt.svm, table.attribute_names[a]);
  });

  const auto models_dir = opt.out / "models";
  std::filesystem::create_directories(models_dir);
  std::vector<KindResultRow> rows;
  for (const auto& r : results) {
    write_file_atomic(models_dir / fmt::format("{}.{}.svm", r.attribute, kind_tag(r.kind)),
                      encode_svm_model({r.model, r.kind, r.attribute}));
    rows.push_back({r.attribute, r.kind, r.ba_val, r.ba_test, r.model.meta.sweeps_used, r.model.meta.final_violation,
                    r.model.meta.converged});
  }
  write_file_atomic(opt.out / "kind_results.tsv", format_kind_results(rows));
}

std::string format_selection(const std::vector<SelectionRow>& rows) {
  std::string out = "attribute\tbest_kind\tbest_ba_test";
  for (auto k : kAllKinds) out += fmt::format("\t{}_val", kind_tag(k));
  for (auto k : kAllKinds) out += fmt::format("\t{}_test", kind_tag(k));
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}", r.attribute, kind_tag(r.best), fmt_real(r.best_ba_test));
    for (double v : r.ba_val) out += "\t" + fmt_real(v);
    for (double v : r.ba_test) out += "\t" + fmt_real(v);
    out += '\n';
  }
  return out;
}

std::vector<SelectionRow> parse_selection(std::string_view tsv) {
  const auto all = text::lines(tsv);
  if (all.empty() || text::fields(all[0]).size() != 11 || text::fields(all[0])[0] != "attribute") {
    throw Error(Errc::BadHeader, "line 1: expected selection header");
  }
  std::vector<SelectionRow> rows;
  for (std::size_t n = 1; n < all.size(); ++n) {
    const auto line = n + 1;
    const auto tok = text::fields(all[n]);
    if (tok.empty()) continue;
    if (tok.size() != 11) throw Error(Errc::FieldCount, fmt::format("line {}: {} fields, expected 11", line, tok.size()));
    SelectionRow r;
    r.attribute = std::string(tok[0]);
    r.best = parse_kind_field(tok[1], line);
    r.best_ba_test = parse_real(tok[2], line);
    for (std::size_t i = 0; i < 4; ++i) {
      r.ba_val[i] = parse_real(tok[3 + i], line);
      r.ba_test[i] = parse_real(tok[7 + i], line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void run_select(const SelectOptions& opt) {
  const auto rows = with_file(opt.results, [&] { return parse_kind_results(read_text_file(opt.results)); });

  // Group by attribute, keeping first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<KindResult>> grouped;
  for (const auto& r : rows) {
    auto [it, fresh] = grouped.try_emplace(r.attribute);
    if (fresh) order.push_back(r.attribute);
    KindResult kr;
    kr.attribute = r.attribute;
    kr.kind = r.kind;
    kr.ba_val = r.ba_val;
    kr.ba_test = r.ba_test;
    it->second.push_back(std::move(kr));
  }

  std::vector<SelectionRow> selection;
  std::vector<RepKind> chosen;
  std::vector<AttributeScores> test_scores;
  for (const auto& attr : order) {
    const auto& results = grouped.at(attr);
    SelectionRow s;
    s.attribute = attr;
    try {
      s.best = select_best(results);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}: attribute {}: {}", opt.results.string(), attr, e.context()));
    }
    for (const auto& r : results) {
      s.ba_val[kind_index(r.kind)] = r.ba_val;
      s.ba_test[kind_index(r.kind)] = r.ba_test;
    }
    s.best_ba_test = s.ba_test[kind_index(s.best)];
    chosen.push_back(s.best);
    test_scores.push_back({attr, s.ba_test});
    selection.push_back(std::move(s));
  }

  const auto counts = decomposition_report(chosen);
  std::filesystem::create_directories(opt.out);
  write_file_atomic(opt.out / "selection.tsv", format_selection(selection));
  write_file_atomic(opt.out / "table3.tsv", format_table3(counts));
  write_file_atomic(opt.out / "fig3.tsv", format_fig3(relative_report(test_scores)));

  std::string summary = fmt::format("attributes\t{}\n", selection.size());
  double best_sum = 0.0;
  std::array<double, 4> kind_sum{};
  for (const auto& s : selection) {
    best_sum += s.best_ba_test;
    for (std::size_t k = 0; k < 4; ++k) kind_sum[k] += s.ba_test[k];
  }
  const double n = selection.empty() ? 1.0 : static_cast<double>(selection.size());
  summary += fmt::format("mean_best_ba_test\t{:.6f}\n", best_sum / n);
  for (auto k : kAllKinds) summary += fmt::format("mean_{}_ba_test\t{:.6f}\n", kind_tag(k), kind_sum[kind_index(k)] / n);
  for (auto k : kAllKinds) summary += fmt::format("best_count_{}\t{}\n", kind_tag(k), counts[kind_index(k)]);
  write_file_atomic(opt.out / "summary.txt", summary);
}

void run_report(const ReportOptions& opt) {
  const auto rows = with_file(opt.selection, [&] { return parse_selection(read_text_file(opt.selection)); });
  std::map<std::string, double> measured;
  for (const auto& r : rows) measured[r.attribute] = r.best_ba_test;
  const auto table = with_file(opt.selection, [&] { return reference_comparison(measured, opt.dataset); });
  std::filesystem::create_directories(opt.out);
  write_file_atomic(opt.out / "table1.tsv", format_table1(table));
}

std::string run_verify_model(const std::filesystem::path& manifest, const std::filesystem::path& weights) {
  const auto spec = with_file(manifest, [&] { return parse_manifest(read_text_file(manifest)); });
  const auto plan = with_file(manifest, [&] { return infer_shapes(spec); });
  std::string out = fmt::format("input {} {} {}\n", spec.input.c, spec.input.h, spec.input.w);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& s = plan[i];
    out += fmt::format("{} {} {} {} {}\n", s.name, layer_kind_name(spec.layers[i].op), s.out.c, s.out.h, s.out.w);
  }
  for (const auto& [kind, layer] : spec.taps) out += fmt::format("tap {} {}\n", kind_tag(kind), layer);
  if (!weights.empty()) {
    const auto model = with_file(weights, [&] { return load_weights(spec, read_file(weights)); });
    std::size_t count = 0;
    for (const auto& [name, p] : model.params()) count += p.values.size();
    out += fmt::format("weights ok: {} tensors, {} values\n", model.params().size(), count);
  }
  return out;
}

}  // namespace layerprobe
