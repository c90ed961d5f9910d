#include "clothkit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"
#include "clothkit/rng.hpp"

namespace clothkit {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += num(values[i]);
  }
  return out;
}

int as_int(const KeyValueConfig& c, const std::string& key, int fallback) {
  const auto v = c.get_int(key, fallback);
  if (v < -(1LL << 30) || v > (1LL << 30)) throw Error(ErrorKind::Config, "config key '" + key + "' out of range");
  return static_cast<int>(v);
}

KernelType parse_kernel(const std::string& name) {
  if (name == "rbf") return KernelType::Rbf;
  if (name == "linear") return KernelType::Linear;
  throw Error(ErrorKind::Config, "svm_kernel must be rbf or linear, got '" + name + "'");
}

}  // namespace

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& c) {
  static const char* const kKnown[] = {
      "tile", "overlap", "knot_spacing", "smoothness", "pixel_pitch", "depth_sign", "downsample",
      "si_scheme", "majority_window", "ridge_thresholds", "contour_min_jump", "lbp_levels", "lbp_sigma",
      "tsd_lo", "tsd_hi", "tsd_bins", "bsp_patch", "bsp_stride", "bsp_controls", "codebook_k", "llc_k",
      "llc_lambda", "sigma_w", "sample_cap", "kmeans_max_iter", "pool_norm", "svm_c", "svm_gamma", "svm_kernel",
      "folds", "repeats", "seed", "features"};
  for (const auto& [key, value] : c.entries()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown) &&
        key.rfind("synth.", 0) != 0) {
      diagnose("ignoring unknown config key '" + key + "'");
    }
  }

  PipelineConfig p;
  p.piecewise.tile = as_int(c, "tile", p.piecewise.tile);
  p.piecewise.overlap = as_int(c, "overlap", p.piecewise.overlap);
  p.piecewise.knot_spacing = c.get_double("knot_spacing", p.piecewise.knot_spacing);
  p.piecewise.smoothness = c.get_double("smoothness", p.piecewise.smoothness);
  p.pixel_pitch = c.get_double("pixel_pitch", p.pixel_pitch);
  p.depth_sign = c.get_double("depth_sign", p.depth_sign);
  p.downsample = as_int(c, "downsample", p.downsample);
  p.si_scheme = parse_quantization_scheme(c.get_string("si_scheme", std::string(to_string(p.si_scheme))));
  p.majority_window = as_int(c, "majority_window", p.majority_window);
  p.ridge_thresholds = c.get_doubles("ridge_thresholds", p.ridge_thresholds);
  p.contour_min_jump = c.get_double("contour_min_jump", p.contour_min_jump);
  p.lbp.levels = as_int(c, "lbp_levels", p.lbp.levels);
  p.lbp.sigma = c.get_double("lbp_sigma", p.lbp.sigma);
  p.tsd.lo = c.get_double("tsd_lo", p.tsd.lo);
  p.tsd.hi = c.get_double("tsd_hi", p.tsd.hi);
  p.tsd.bins = as_int(c, "tsd_bins", p.tsd.bins);
  p.bsp.patch = as_int(c, "bsp_patch", p.bsp.patch);
  p.bsp.stride = as_int(c, "bsp_stride", p.bsp.stride);
  p.bsp.controls = as_int(c, "bsp_controls", p.bsp.controls);
  p.codebook_size = as_int(c, "codebook_k", p.codebook_size);
  p.llc_k = as_int(c, "llc_k", p.llc_k);
  p.llc_lambda = c.get_double("llc_lambda", p.llc_lambda);
  p.sigma_w = c.get_double("sigma_w", p.sigma_w);
  p.sample_cap = static_cast<std::size_t>(c.get_uint64("sample_cap", p.sample_cap));
  p.kmeans_max_iterations = as_int(c, "kmeans_max_iter", p.kmeans_max_iterations);
  const auto pool = c.get_string("pool_norm", "l2");
  if (pool != "l2" && pool != "none") throw Error(ErrorKind::Config, "pool_norm must be l2 or none, got '" + pool + "'");
  p.pool_l2 = pool == "l2";
  p.svm_c = c.get_double("svm_c", p.svm_c);
  const auto gamma = c.get_string("svm_gamma", "auto");
  if (gamma != "auto") p.svm_gamma = c.get_double("svm_gamma", 0.0);
  p.kernel = parse_kernel(c.get_string("svm_kernel", "rbf"));
  p.folds = as_int(c, "folds", p.folds);
  p.repeats = as_int(c, "repeats", p.repeats);
  p.seed = c.get_uint64("seed", p.seed);
  p.features = FeatureSet::parse(c.get_string("features", p.features.name()));
  p.check();
  return p;
}

KeyValueConfig PipelineConfig::to_config() const {
  KeyValueConfig c;
  c.set("tile", std::to_string(piecewise.tile));
  c.set("overlap", std::to_string(piecewise.overlap));
  c.set("knot_spacing", num(piecewise.knot_spacing));
  c.set("smoothness", num(piecewise.smoothness));
  c.set("pixel_pitch", num(pixel_pitch));
  c.set("depth_sign", num(depth_sign));
  c.set("downsample", std::to_string(downsample));
  c.set("si_scheme", std::string(to_string(si_scheme)));
  c.set("majority_window", std::to_string(majority_window));
  c.set("ridge_thresholds", join(ridge_thresholds));
  c.set("contour_min_jump", num(contour_min_jump));
  c.set("lbp_levels", std::to_string(lbp.levels));
  c.set("lbp_sigma", num(lbp.sigma));
  c.set("tsd_lo", num(tsd.lo));
  c.set("tsd_hi", num(tsd.hi));
  c.set("tsd_bins", std::to_string(tsd.bins));
  c.set("bsp_patch", std::to_string(bsp.patch));
  c.set("bsp_stride", std::to_string(bsp.stride));
  c.set("bsp_controls", std::to_string(bsp.controls));
  c.set("codebook_k", std::to_string(codebook_size));
  c.set("llc_k", std::to_string(llc_k));
  c.set("llc_lambda", num(llc_lambda));
  c.set("sigma_w", num(sigma_w));
  c.set("sample_cap", std::to_string(sample_cap));
  c.set("kmeans_max_iter", std::to_string(kmeans_max_iterations));
  c.set("pool_norm", pool_l2 ? "l2" : "none");
  c.set("svm_c", num(svm_c));
  c.set("svm_gamma", svm_gamma ? num(*svm_gamma) : "auto");
  c.set("svm_kernel", kernel == KernelType::Rbf ? "rbf" : "linear");
  c.set("folds", std::to_string(folds));
  c.set("repeats", std::to_string(repeats));
  c.set("seed", std::to_string(seed));
  c.set("features", features.name());
  return c;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a64(to_config().serialize()); }

void PipelineConfig::check() const {
  const auto fail = [](const std::string& why) { return Error(ErrorKind::Config, why); };
  piecewise.check();
  bsp.check();
  if (depth_sign != 1.0 && depth_sign != -1.0) throw fail("depth_sign must be 1 or -1");
  if (downsample < 1) throw fail("downsample must be >= 1");
  if (!(pixel_pitch > 0)) throw fail("pixel_pitch must be > 0");
  if (majority_window < 3 || majority_window % 2 == 0) throw fail("majority_window must be odd and >= 3");
  if (ridge_thresholds.empty()) throw fail("ridge_thresholds must not be empty");
  for (const double t : ridge_thresholds) {
    if (!(t >= 0)) throw fail("ridge thresholds must be >= 0");
  }
  if (!(contour_min_jump >= 0)) throw fail("contour_min_jump must be >= 0");
  if (lbp.levels < 1) throw fail("lbp_levels must be >= 1");
  if (!(lbp.sigma > 0)) throw fail("lbp_sigma must be > 0");
  if (tsd.bins < 1 || !(tsd.hi > tsd.lo)) throw fail("TSD histogram needs tsd_bins >= 1 and tsd_hi > tsd_lo");
  if (codebook_size < 2) throw fail("codebook_k must be >= 2");
  if (llc_k < 1 || llc_k > codebook_size) throw fail("llc_k must lie in [1, codebook_k]");
  if (!(llc_lambda >= 0)) throw fail("llc_lambda must be >= 0");
  if (!(sigma_w >= 0)) throw fail("sigma_w must be >= 0");
  if (sample_cap < static_cast<std::size_t>(codebook_size)) throw fail("sample_cap must be >= codebook_k");
  if (kmeans_max_iterations < 1) throw fail("kmeans_max_iter must be >= 1");
  if (!(svm_c > 0)) throw fail("svm_c must be > 0");
  if (svm_gamma && !(*svm_gamma > 0)) throw fail("svm_gamma must be > 0 or auto");
  if (folds < 2) throw fail("folds must be >= 2");
  if (repeats < 1) throw fail("repeats must be >= 1");
  if (features.empty()) throw fail("feature set is empty");
}

std::size_t PipelineConfig::dimension() const {
  return fused_dimension(features, lbp, tsd, codebook_size);
}

double PipelineConfig::gamma() const {
  return svm_gamma ? *svm_gamma : 10.0 / static_cast<double>(dimension());
}

DepthMap preprocess(const DepthMap& raw, const PipelineConfig& config) {
  raw.check();
  DepthMap map = downsample(raw, config.downsample);
  if (config.depth_sign != 1.0) {
    for (double& v : map.depth.values()) v *= config.depth_sign;
  }
  return map;
}

SurfaceAnalysis analyze_surface(const DepthMap& map, const PipelineConfig& config) {
  map.check(true);
  SurfaceAnalysis a;
  a.surface = fit_surface_piecewise(map, config.piecewise);
  a.curvature = principal_curvatures(a.surface, config.pixel_pitch);
  a.shape = majority_rank_filter(shape_index(a.curvature, config.si_scheme), config.majority_window);
  const auto ridges = thin(detect_ridges(a.curvature, a.shape, config.ridge_thresholds));
  const auto contours = thin(detect_contours(a.surface, a.curvature, {config.contour_min_jump, config.pixel_pitch}));
  a.topology = TopologyMap::from_maps(ridges, contours, a.surface.z);
  a.tsd = tsd_distances(a.topology);
  return a;
}

ImageFeatures extract_image(const DepthMap& raw, const PipelineConfig& config) {
  const auto map = preprocess(raw, config);
  const auto a = analyze_surface(map, config);
  ImageFeatures f;
  f.lbp = lbp_histogram(map, config.lbp);
  f.si = si_histogram(a.shape);
  f.tsd = tsd_histogram(a.tsd, config.tsd);
  if (config.features.has(Block::Bsp)) f.bsp = bsp_descriptors(a.surface.z, a.surface.mask, a.topology, config.bsp);
  return f;
}

ImageFeatures zero_features(const PipelineConfig& config) {
  ImageFeatures f;
  f.lbp.values.assign(static_cast<std::size_t>(kUniformPatterns * config.lbp.levels), 0.0);
  f.si.values.assign(kSurfaceClassCount, 0.0);
  f.tsd.values.assign(static_cast<std::size_t>(config.tsd.bins * config.tsd.bins), 0.0);
  f.failed = true;
  return f;
}

Codebook learn_codebook(std::span<const ImageFeatures* const> images, const PipelineConfig& config,
                        std::uint64_t seed) {
  std::vector<const std::vector<double>*> pool;
  for (const auto* img : images) {
    for (const auto& d : img->bsp) pool.push_back(&d.values);
  }
  if (pool.size() < static_cast<std::size_t>(config.codebook_size)) {
    throw Error(ErrorKind::Config, "only " + std::to_string(pool.size()) + " BSP descriptors for a codebook of " +
                                       std::to_string(config.codebook_size) + " atoms");
  }
  Rng rng(mix_seed(seed, 0));
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t take = std::min(pool.size(), config.sample_cap);
  if (take < pool.size()) {
    for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
    order.resize(take);
    std::sort(order.begin(), order.end());
  }
  Matrix samples(0, pool.front()->size());
  samples.data.reserve(take * samples.cols);
  for (const auto i : order) samples.append_row(*pool[i]);

  KMeansOptions opts;
  opts.clusters = config.codebook_size;
  opts.max_iterations = config.kmeans_max_iterations;
  opts.seed = mix_seed(seed, 1);
  opts.sigma_w = config.sigma_w;
  return kmeans(samples, opts);
}

std::vector<double> encode_bsp(const ImageFeatures& image, const Codebook& codebook, const PipelineConfig& config) {
  std::vector<LlcCode> codes(image.bsp.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    codes[i] = llc_encode(image.bsp[i].values, codebook, config.llc_k, config.llc_lambda);
  }
  auto pooled = sum_pool(codes, codebook.size);
  if (config.pool_l2) l2_normalize(pooled);
  return pooled;
}

FeatureVector encode_image(const ImageFeatures& image, const Codebook* codebook, const PipelineConfig& config) {
  std::vector<double> pooled;
  if (config.features.has(Block::Bsp)) {
    if (!codebook) throw Error(ErrorKind::Config, "BSP features need a codebook");
    if (codebook->size != config.codebook_size) {
      throw Error(ErrorKind::Dimension, "codebook has K=" + std::to_string(codebook->size) +
                                            " but the configuration expects K=" + std::to_string(config.codebook_size));
    }
    pooled = encode_bsp(image, *codebook, config);
  }
  return fuse(image.lbp, image.si, image.tsd, pooled, config.features, config.lbp, config.tsd, config.codebook_size);
}

CvReport crossval_images(const std::vector<ImageFeatures>& images, std::span<const int> labels,
                         std::span<const std::string> items, const std::vector<std::string>& classes,
                         const PipelineConfig& config) {
  if (images.size() != labels.size()) throw Error(ErrorKind::Dimension, "image and label counts differ");
  const Kernel kernel{config.kernel, config.gamma()};
  SmoOptions smo;
  smo.c = config.svm_c;

  const auto run = [&](const FoldSplit& split, int repeat, int fold) {
    std::optional<Codebook> codebook;
    if (config.features.has(Block::Bsp)) {
      std::vector<const ImageFeatures*> train;
      for (const auto i : split.train) train.push_back(&images[i]);
      codebook = learn_codebook(train, config, mix_seed(config.seed, 1000ULL * static_cast<std::uint64_t>(repeat) +
                                                                         static_cast<std::uint64_t>(fold) + 1));
    }
    const Codebook* cb = codebook ? &*codebook : nullptr;
    const auto encode = [&](const std::vector<std::size_t>& idx) {
      Matrix x(idx.size(), config.dimension());
      parallel_for(idx.size(), [&](std::size_t r) {
        const auto v = encode_image(images[idx[r]], cb, config);
        std::copy(v.values.begin(), v.values.end(), x.row(r).begin());
      });
      return x;
    };
    const Matrix xtrain = encode(split.train);
    const Matrix xtest = encode(split.test);
    std::vector<int> ytrain;
    for (const auto i : split.train) ytrain.push_back(labels[i]);
    const auto model = train_one_vs_all(xtrain, ytrain, classes, kernel, smo);
    std::vector<int> out(split.test.size());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = predict(model, xtest.row(r)).label;
    return out;
  };
  return crossval(labels, items, classes, CvOptions{config.folds, config.repeats, config.seed}, run);
}

}  // namespace clothkit
