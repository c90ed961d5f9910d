#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "commands.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code(clothkit::ErrorKind kind) {
  switch (kind) {
    case clothkit::ErrorKind::Config: return kExitUsage;
    case clothkit::ErrorKind::Numeric: return kExitNumeric;
    default: return kExitData;
  }
}

void add_common(CLI::App* cmd, clothkit::cli::CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "key=value pipeline configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override one config key (key=value), repeatable");
  cmd->add_option("--features", common.features, "feature blocks, e.g. lstb, lbp, lbp+si+bsp");
  cmd->add_option("--seed", common.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace clothkit::cli;

  CLI::App app{"clothkit: clothing category recognition from depth maps"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  CommonOptions common;
  SynthOptions synth;
  ExtractOptions extract;
  CodebookOptions codebook;
  TrainOptions train;
  PredictOptions predict;
  CrossvalOptions crossval;
  ReportOptions report;

  auto* c_synth = app.add_subcommand("synth", "generate a synthetic labelled dataset");
  c_synth->add_option("--spec", synth.spec_path, "synthetic dataset spec (key=value)")->check(CLI::ExistingFile);
  c_synth->add_option("--out", synth.out_dir, "output directory")->required();
  c_synth->add_option("-n,--per-class", synth.per_class, "samples per class")->required();
  c_synth->add_option("--seed", synth.seed, "random seed (overrides the spec)");

  auto* c_extract = app.add_subcommand("extract", "extract fused feature vectors");
  add_common(c_extract, common);
  c_extract->add_option("--manifest", extract.manifest, "dataset manifest CSV")->required();
  c_extract->add_option("--out", extract.out, "feature file (.csv for text, otherwise binary)")->required();
  c_extract->add_option("--codebook", extract.codebook, "trained codebook");
  c_extract->add_flag("--fit-codebook", extract.fit_codebook, "fit a codebook on this manifest (training data only)");
  c_extract->add_option("--codebook-out", extract.codebook_out, "where to save the fitted codebook");
  c_extract->add_option("--format", extract.format, "auto, csv or binary");

  auto* c_codebook = app.add_subcommand("codebook", "learn a BSP codebook");
  add_common(c_codebook, common);
  c_codebook->add_option("--manifest", codebook.manifest, "dataset manifest CSV")->required();
  c_codebook->add_option("--out", codebook.out, "codebook file")->required();

  auto* c_train = app.add_subcommand("train", "train a one-vs-all SVM model");
  add_common(c_train, common);
  c_train->add_option("--manifest", train.manifest, "training manifest CSV")->required();
  c_train->add_option("--model", train.model, "model file to write")->required();
  c_train->add_option("--codebook", train.codebook, "existing codebook (otherwise one is fitted)");
  c_train->add_option("--codebook-out", train.codebook_out, "fitted codebook path (default <model>.llcb)");

  auto* c_predict = app.add_subcommand("predict", "classify depth maps");
  add_common(c_predict, common);
  c_predict->add_option("--model", predict.model, "model file")->required();
  c_predict->add_option("--codebook", predict.codebook, "codebook (default <model>.llcb)");
  c_predict->add_option("--manifest", predict.manifest, "manifest of samples to classify");
  c_predict->add_option("--depth", predict.depth, "single 16-bit PGM depth map");
  c_predict->add_option("--mask", predict.mask, "mask for --depth");
  c_predict->add_option("--out", predict.out, "CSV output (default stdout)");

  auto* c_crossval = app.add_subcommand("crossval", "repeated grouped stratified cross-validation");
  add_common(c_crossval, common);
  c_crossval->add_option("--manifest", crossval.manifest, "dataset manifest CSV")->required();
  c_crossval->add_option("--out", crossval.out_dir, "directory for summary.csv and confusion.csv")->required();

  auto* c_report = app.add_subcommand("report", "per-class accuracy from a confusion matrix");
  c_report->add_option("confusion", report.confusion, "confusion CSV or a crossval output directory")->required();
  c_report->add_option("--out", report.out, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (!quiet) {
    clothkit::set_diagnostic_sink([](std::string_view msg) {
      std::fprintf(stderr, "clothkit: warning: %.*s\n", static_cast<int>(msg.size()), msg.data());
    });
  }

  try {
    if (c_synth->parsed()) cmd_synth(synth);
    else if (c_extract->parsed()) cmd_extract(common, extract);
    else if (c_codebook->parsed()) cmd_codebook(common, codebook);
    else if (c_train->parsed()) cmd_train(common, train);
    else if (c_predict->parsed()) cmd_predict(common, predict);
    else if (c_crossval->parsed()) cmd_crossval(common, crossval);
    else if (c_report->parsed()) cmd_report(report);
  } catch (const clothkit::Error& e) {
    std::fprintf(stderr, "clothkit: %s: %s\n", clothkit::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "clothkit: internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
