#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clothkit/pipeline.hpp"

namespace clothkit::cli {

/// Options shared by every pipeline command. Precedence, lowest first:
/// built-in defaults, --config file, --set overrides, --features / --seed.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string features;
  std::optional<std::uint64_t> seed;
};

PipelineConfig resolve_config(const CommonOptions& common);

struct SynthOptions {
  std::string spec_path;
  std::string out_dir;
  int per_class = 0;
  std::optional<std::uint64_t> seed;
};

struct ExtractOptions {
  std::string manifest;
  std::string out;
  std::string codebook;
  bool fit_codebook = false;
  std::string codebook_out;
  std::string format = "auto";
};

struct CodebookOptions {
  std::string manifest;
  std::string out;
};

struct TrainOptions {
  std::string manifest;
  std::string model;
  std::string codebook;
  std::string codebook_out;
};

struct PredictOptions {
  std::string model;
  std::string codebook;
  std::string manifest;
  std::string depth;
  std::string mask;
  std::string out;
};

struct CrossvalOptions {
  std::string manifest;
  std::string out_dir;
};

struct ReportOptions {
  std::string confusion;
  std::string out;
};

void cmd_synth(const SynthOptions& options);
void cmd_extract(const CommonOptions& common, const ExtractOptions& options);
void cmd_codebook(const CommonOptions& common, const CodebookOptions& options);
void cmd_train(const CommonOptions& common, const TrainOptions& options);
void cmd_predict(const CommonOptions& common, const PredictOptions& options);
void cmd_crossval(const CommonOptions& common, const CrossvalOptions& options);
void cmd_report(const ReportOptions& options);

}  // namespace clothkit::cli
