#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void ensure_parent(const fs::path& path) {
  const auto parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + parent.string() + ": " + ec.message());
}

std::string stamp(const PipelineConfig& config) {
  return "config_hash=" + to_hex(config.hash()) + " seed=" + std::to_string(config.seed) +
         " feature_set=" + config.features.name();
}

/// Per-image failures become zero blocks so one bad file never aborts a batch.
std::vector<ImageFeatures> extract_all(const DatasetManifest& manifest, const PipelineConfig& config) {
  std::vector<ImageFeatures> out(manifest.entries.size());
  parallel_for(out.size(), [&](std::size_t i) {
    try {
      out[i] = extract_image(manifest.load_entry(i), config);
    } catch (const Error& e) {
      diagnose(manifest.entries[i].depth_path + ": " + e.what() + "; using zero features");
      out[i] = zero_features(config);
    }
  });
  return out;
}

std::vector<int> manifest_labels(const DatasetManifest& manifest) {
  std::vector<int> labels;
  labels.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) labels.push_back(manifest.category_index(e.label));
  return labels;
}

Codebook fit_codebook(const std::vector<ImageFeatures>& images, const PipelineConfig& config) {
  std::vector<const ImageFeatures*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& f : images) ptrs.push_back(&f);
  return learn_codebook(ptrs, config, config.seed);
}

/// Loads a codebook and adopts its K so the fused dimension follows the file.
Codebook load_codebook_for(const fs::path& path, PipelineConfig& config, bool warn = true) {
  auto cb = load_codebook(path);
  if (cb.size != config.codebook_size) {
    if (warn) diagnose("codebook " + path.string() + " has K=" + std::to_string(cb.size) + "; overriding codebook_k=" +
                       std::to_string(config.codebook_size));
    config.codebook_size = cb.size;
    if (config.llc_k > cb.size) config.llc_k = cb.size;
  }
  return cb;
}

Matrix encode_all(const std::vector<ImageFeatures>& images, const Codebook* codebook, const PipelineConfig& config) {
  Matrix x(images.size(), config.dimension());
  parallel_for(images.size(), [&](std::size_t r) {
    const auto v = encode_image(images[r], codebook, config);
    std::copy(v.values.begin(), v.values.end(), x.row(r).begin());
  });
  return x;
}

}  // namespace

PipelineConfig resolve_config(const CommonOptions& common) {
  KeyValueConfig kv;
  if (!common.config_path.empty()) kv = KeyValueConfig::load(common.config_path);
  for (const auto& o : common.overrides) kv.apply_override(o);
  if (!common.features.empty()) kv.set("features", common.features);
  if (common.seed) kv.set("seed", std::to_string(*common.seed));
  return PipelineConfig::from_config(kv);
}

void cmd_synth(const SynthOptions& options) {
  if (options.per_class < 0) throw Error(ErrorKind::Config, "--per-class must be >= 0");
  KeyValueConfig kv;
  if (!options.spec_path.empty()) kv = KeyValueConfig::load(options.spec_path);
  if (options.seed) kv.set("seed", std::to_string(*options.seed));
  const auto spec = synth_dataset_from_config(kv);

  const fs::path out_dir = options.out_dir;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  const auto classes = spec.classes.size();
  const auto n = static_cast<std::size_t>(options.per_class);
  DatasetManifest manifest;
  manifest.entries.resize(classes * n);
  parallel_for(classes * n, [&](std::size_t k) {
    const int c = static_cast<int>(k / n);
    const int i = static_cast<int>(k % n);
    const auto sample = synth_sample(spec, c, i);
    char stem[64];
    std::snprintf(stem, sizeof stem, "%s_%04d", spec.classes[static_cast<std::size_t>(c)].c_str(), i);
    const std::string depth = std::string(stem) + ".pgm";
    const std::string mask = std::string(stem) + "_mask.pgm";
    save_depth(out_dir / depth, sample.map);
    save_mask(out_dir / mask, sample.map);
    manifest.entries[k] = {depth, mask, spec.classes[static_cast<std::size_t>(c)], sample.item_id};
  });
  save_manifest(out_dir / "manifest.csv", manifest);
  std::cout << "wrote " << manifest.entries.size() << " samples to " << (out_dir / "manifest.csv").string() << '\n';
}

void cmd_extract(const CommonOptions& common, const ExtractOptions& options) {
  auto config = resolve_config(common);
  const bool bsp = config.features.has(Block::Bsp);
  if (bsp && options.codebook.empty() && !options.fit_codebook) {
    throw Error(ErrorKind::Config, "feature set includes bsp: pass --codebook or --fit-codebook");
  }
  if (!options.codebook.empty() && options.fit_codebook) {
    throw Error(ErrorKind::Config, "--codebook and --fit-codebook are mutually exclusive");
  }
  std::string format = options.format;
  if (format == "auto") format = fs::path(options.out).extension() == ".csv" ? "csv" : "binary";
  if (format != "csv" && format != "binary") throw Error(ErrorKind::Config, "--format must be auto, csv or binary");

  std::optional<Codebook> codebook;
  if (bsp && !options.codebook.empty()) codebook = load_codebook_for(options.codebook, config);

  const auto manifest = load_manifest(options.manifest);
  const auto images = extract_all(manifest, config);
  if (bsp && options.fit_codebook && !images.empty()) {
    codebook = fit_codebook(images, config);
    if (!options.codebook_out.empty()) {
      ensure_parent(options.codebook_out);
      save_codebook(options.codebook_out, *codebook, config.hash(), config.seed);
    }
  }

  const Matrix x = codebook || !bsp ? encode_all(images, codebook ? &*codebook : nullptr, config)
                                    : Matrix(0, config.dimension());
  FeatureFile file;
  file.config_hash = config.hash();
  file.seed = config.seed;
  file.feature_set = config.features.name();
  file.dimension = config.dimension();
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    file.records.push_back({manifest.entries[i].item_id, manifest.entries[i].label, {row.begin(), row.end()}});
  }
  ensure_parent(options.out);
  if (format == "csv") save_features_csv(options.out, file);
  else save_features_binary(options.out, file);
  std::cout << "wrote " << file.records.size() << " feature vectors of dimension " << file.dimension << " to "
            << options.out << '\n';
}

void cmd_codebook(const CommonOptions& common, const CodebookOptions& options) {
  const auto config = resolve_config(common);
  const auto manifest = load_manifest(options.manifest);
  auto bsp_config = config;
  bsp_config.features = config.features.with(Block::Bsp);
  const auto cb = fit_codebook(extract_all(manifest, bsp_config), config);
  ensure_parent(options.out);
  save_codebook(options.out, cb, config.hash(), config.seed);
  std::cout << "wrote codebook K=" << cb.size << " D=" << cb.dimension << " to " << options.out << '\n';
}

void cmd_train(const CommonOptions& common, const TrainOptions& options) {
  auto config = resolve_config(common);
  const bool bsp = config.features.has(Block::Bsp);
  std::optional<Codebook> codebook;
  if (bsp && !options.codebook.empty()) codebook = load_codebook_for(options.codebook, config);

  const auto manifest = load_manifest(options.manifest);
  const auto images = extract_all(manifest, config);
  if (bsp && !codebook) {
    codebook = fit_codebook(images, config);
    const std::string out = options.codebook_out.empty() ? options.model + ".llcb" : options.codebook_out;
    ensure_parent(out);
    save_codebook(out, *codebook, config.hash(), config.seed);
  }
  const Matrix x = encode_all(images, codebook ? &*codebook : nullptr, config);
  SmoOptions smo;
  smo.c = config.svm_c;
  auto model = train_one_vs_all(x, manifest_labels(manifest), manifest.categories,
                                Kernel{config.kernel, config.gamma()}, smo);
  model.feature_set = config.features.name();
  model.config_hash = config.hash();
  model.seed = config.seed;
  ensure_parent(options.model);
  save_model(options.model, model);
  std::cout << "trained " << model.classes.size() << " classes on " << x.rows << " samples (D=" << model.dimension
            << ") -> " << options.model << '\n';
}

void cmd_predict(const CommonOptions& common, const PredictOptions& options) {
  if (options.manifest.empty() == options.depth.empty()) {
    throw Error(ErrorKind::Config, "pass exactly one of --manifest or --depth");
  }
  auto config = resolve_config(common);
  const auto model = load_model(options.model);
  config.features = FeatureSet::parse(model.feature_set);

  std::optional<Codebook> codebook;
  if (config.features.has(Block::Bsp)) {
    const std::string path = options.codebook.empty() ? options.model + ".llcb" : options.codebook;
    codebook = load_codebook_for(path, config, false);
  }
  if (config.dimension() != model.dimension) {
    throw Error(ErrorKind::Dimension, "codebook K=" + std::to_string(config.codebook_size) +
                                          " gives feature dimension " + std::to_string(config.dimension()) +
                                          " but the model expects D=" + std::to_string(model.dimension));
  }

  DatasetManifest manifest;
  if (!options.manifest.empty()) {
    manifest = load_manifest(options.manifest);
  } else {
    manifest.entries.push_back({options.depth, options.mask, "", ""});
  }
  const auto images = extract_all(manifest, config);
  const Matrix x = encode_all(images, codebook ? &*codebook : nullptr, config);

  std::vector<Prediction> predictions(x.rows);
  parallel_for(x.rows, [&](std::size_t i) { predictions[i] = predict(model, x.row(i)); });

  std::string out = "# clothkit-predict model_config_hash=" + to_hex(model.config_hash) +
                    " model_seed=" + std::to_string(model.seed) + " " + stamp(config) + "\n";
  out += "path,predicted";
  for (const auto& c : model.classes) out += ',' + c;
  out += '\n';
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out += manifest.entries[i].depth_path + ',' + model.classes[static_cast<std::size_t>(predictions[i].label)];
    for (const double d : predictions[i].decision) out += ',' + fmt("%.17g", d);
    out += '\n';
  }
  if (options.out.empty()) {
    std::cout << out;
  } else {
    ensure_parent(options.out);
    write_text(options.out, out);
  }
}

void cmd_crossval(const CommonOptions& common, const CrossvalOptions& options) {
  const auto config = resolve_config(common);
  const auto manifest = load_manifest(options.manifest);
  const auto images = extract_all(manifest, config);
  std::vector<std::string> items;
  for (const auto& e : manifest.entries) items.push_back(e.item_id);
  const auto report = crossval_images(images, manifest_labels(manifest), items, manifest.categories, config);

  const fs::path dir = options.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  std::string summary = "# clothkit-crossval " + stamp(config) + "\n";
  summary += "key,value\n";
  summary += "config_hash," + to_hex(config.hash()) + "\n";
  summary += "seed," + std::to_string(config.seed) + "\n";
  summary += "feature_set," + config.features.name() + "\n";
  summary += "samples," + std::to_string(images.size()) + "\n";
  summary += "folds," + std::to_string(report.folds) + "\n";
  summary += "repeats," + std::to_string(report.repeats) + "\n";
  summary += "mean_accuracy," + fmt("%.6f", report.mean_accuracy) + "\n";
  for (std::size_t r = 0; r < report.repeat_accuracy.size(); ++r) {
    summary += "repeat_" + std::to_string(r + 1) + "," + fmt("%.6f", report.repeat_accuracy[r]) + "\n";
  }
  write_text(dir / "summary.csv", summary);
  save_confusion_csv(dir / "confusion.csv", report.confusion, "clothkit-crossval " + stamp(config));
  std::cout << "mean accuracy " << fmt("%.4f", report.mean_accuracy) << " (" << report.folds << "-fold x "
            << report.repeats << ", " << config.features.name() << ") -> " << dir.string() << '\n';
}

void cmd_report(const ReportOptions& options) {
  fs::path path = options.confusion;
  if (fs::is_directory(path)) path /= "confusion.csv";
  const auto m = load_confusion_csv(path);
  const auto acc = confusion_accuracy(m);
  std::ostringstream out;
  // carry the provenance stamp of the confusion file through
  {
    std::ifstream in(path);
    std::string line;
    if (std::getline(in, line) && line.rfind('#', 0) == 0) out << line << '\n';
  }
  out << "class,samples,accuracy\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    long long n = 0;
    for (const auto v : m.counts[i]) n += v;
    out << m.classes[i] << ',' << n << ',' << (acc.per_class[i] ? fmt("%.4f", *acc.per_class[i]) : "n/a") << '\n';
  }
  out << "overall," << m.total() << ',' << fmt("%.4f", acc.overall) << '\n';
  out << "macro,," << fmt("%.4f", acc.macro) << '\n';
  if (options.out.empty()) {
    std::cout << out.str();
  } else {
    ensure_parent(options.out);
    write_text(options.out, out.str());
  }
}

}  // namespace clothkit::cli
