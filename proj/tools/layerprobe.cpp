// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "layerprobe/data_ingest.hpp"
#include "layerprobe/error.hpp"
#include "layerprobe/pipeline.hpp"

namespace lp = layerprobe;

int main(int argc, char** argv) {
  CLI::App app{"layerprobe: probe CNN layer representations with per-attribute linear SVMs"};
  app.require_subcommand(1);

  std::string kinds = "spat3,spat1,fc1,fc2";
  unsigned threads = 0;

  lp::ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "images + landmarks + model -> FEA1 feature caches");
  extract->add_option("--model", ex.model, "model manifest (.nnm)")->required()->check(CLI::ExistingFile);
  extract->add_option("--weights", ex.weights, "weight blob (.nnw)")->required()->check(CLI::ExistingFile);
  extract->add_option("--images", ex.images, "directory of PNM images")->required()->check(CLI::ExistingDirectory);
  extract->add_option("--landmarks", ex.landmarks, "landmark file")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", ex.out, "output directory")->required();
  extract->add_option("--crop", ex.crop, "center patch side")->capture_default_str();
  extract->add_option("--canvas", ex.canvas, "aligned canvas side")->capture_default_str();
  extract->add_option("--kinds", kinds, "comma-separated kinds")->capture_default_str();
  extract->add_option("--threads", threads, "worker threads (default $LAYERPROBE_THREADS or 1)");

  lp::TrainOptions tr;
  auto* train = app.add_subcommand("train", "feature caches + labels -> SVM models and kind_results.tsv");
  train->add_option("--feats", tr.feats, "directory of .fea caches")->required()->check(CLI::ExistingDirectory);
  train->add_option("--attrs", tr.attrs, "attribute annotation file")->required()->check(CLI::ExistingFile);
  train->add_option("--partition", tr.partition, "partition file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "output directory")->required();
  train->add_option("--C", tr.svm.C, "SVM regularization constant")->capture_default_str();
  train->add_option("--eps", tr.svm.eps, "SVM stopping tolerance")->capture_default_str();
  train->add_option("--class-weighted", tr.svm.class_weighted, "inverse-prevalence class weights")
      ->capture_default_str();
  train->add_option("--l2norm", tr.svm.l2norm, "unit-normalize feature vectors")->capture_default_str();
  train->add_option("--seed", tr.svm.seed, "seed for permutations and subsampling")->capture_default_str();
  train->add_option("--kinds", kinds, "comma-separated kinds")->capture_default_str();
  train->add_option("--threads", threads, "worker threads (default $LAYERPROBE_THREADS or 1)");

  lp::SelectOptions sel;
  auto* select = app.add_subcommand("select", "kind_results.tsv -> selection, table3, fig3, summary");
  select->add_option("--results", sel.results, "kind_results.tsv (default <out>/kind_results.tsv)");
  select->add_option("--out", sel.out, "output directory")->required();

  lp::ReportOptions rep;
  std::string dataset = "celeba";
  auto* report = app.add_subcommand("report", "selection.tsv -> table1.tsv against the reference table");
  report->add_option("--results", rep.selection, "selection.tsv (default <out>/selection.tsv)");
  report->add_option("--out", rep.out, "output directory")->required();
  report->add_option("--dataset", dataset, "celeba or lfwa")->check(CLI::IsMember({"celeba", "lfwa"}))->capture_default_str();

  lp::SynthConfig syn;
  std::filesystem::path synth_out;
  auto* synth = app.add_subcommand("synth", "generate a planted-attribute dataset and a random model");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", syn.seed, "generator seed")->capture_default_str();
  synth->add_option("--n-images", syn.n_images, "number of images")->capture_default_str();
  synth->add_option("--noise", syn.noise, "pixel noise sigma")->capture_default_str();
  synth->add_option("--canvas", syn.canvas, "image side")->capture_default_str();
  synth->add_option("--crop", syn.crop, "model input side")->capture_default_str();

  std::filesystem::path vm_model, vm_weights;
  auto* verify = app.add_subcommand("verify-model", "print the shape plan; validate weights if given");
  verify->add_option("--model", vm_model, "model manifest (.nnm)")->required()->check(CLI::ExistingFile);
  verify->add_option("--weights", vm_weights, "weight blob (.nnw)")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) {
      ex.kinds = lp::parse_kinds(kinds);
      ex.threads = threads;
      lp::run_extract(ex);
    } else if (train->parsed()) {
      tr.kinds = lp::parse_kinds(kinds);
      tr.threads = threads;
      lp::run_train(tr);
    } else if (select->parsed()) {
      if (sel.results.empty()) sel.results = sel.out / "kind_results.tsv";
      lp::run_select(sel);
    } else if (report->parsed()) {
      if (rep.selection.empty()) rep.selection = rep.out / "selection.tsv";
      rep.dataset = dataset == "lfwa" ? lp::Dataset::LFWA : lp::Dataset::CelebA;
      lp::run_report(rep);
    } else if (synth->parsed()) {
      syn.rules = lp::default_rules(syn.canvas);
      lp::generate_synthetic(syn, synth_out);
    } else if (verify->parsed()) {
      std::cout << lp::run_verify_model(vm_model, vm_weights);
    }
  } catch (const lp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
