#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clothkit/bspline.hpp"
#include "clothkit/classify.hpp"
#include "clothkit/coding.hpp"
#include "clothkit/config.hpp"
#include "clothkit/depthio.hpp"
#include "clothkit/features.hpp"
#include "clothkit/geometry.hpp"
#include "clothkit/topology.hpp"

namespace clothkit {

/// Every tunable of the recognition pipeline.
struct PipelineConfig {
  // preprocessing
  double depth_sign = 1.0;
  int downsample = 1;
  // surface fitting
  PiecewiseOptions piecewise;
  double pixel_pitch = 1.0;
  // shape index / topology
  QuantizationScheme si_scheme = QuantizationScheme::EqualWidth;
  int majority_window = 5;
  std::vector<double> ridge_thresholds{0.02, 0.05, 0.1};
  double contour_min_jump = 1e-3;
  // descriptors
  LbpOptions lbp;
  TsdHistogramOptions tsd;
  BspOptions bsp;
  // coding
  int codebook_size = 256;
  int llc_k = 5;
  double llc_lambda = 1e-4;
  double sigma_w = 0.005;
  std::size_t sample_cap = 100'000;
  int kmeans_max_iterations = 100;
  bool pool_l2 = true;  // L2-normalize the sum-pooled LLC block
  // classification
  KernelType kernel = KernelType::Rbf;
  double svm_c = 10.0;
  std::optional<double> svm_gamma;  // default 10 / D
  int folds = 5;
  int repeats = 10;
  std::uint64_t seed = 42;
  FeatureSet features = FeatureSet::all();

  static PipelineConfig from_config(const KeyValueConfig& config);
  KeyValueConfig to_config() const;
  /// FNV-1a of the canonical serialization.
  std::uint64_t hash() const;
  /// Throws Config for any field violating its module's preconditions.
  void check() const;

  std::size_t dimension() const;
  double gamma() const;
};

/// Per-image output of stages (1) and (2): global blocks and the raw local
/// descriptors, before encoding.
struct ImageFeatures {
  GlobalFeature lbp{Block::Lbp, {}};
  GlobalFeature si{Block::Si, {}};
  GlobalFeature tsd{Block::Tsd, {}};
  std::vector<BspDescriptor> bsp;
  bool failed = false;
};

/// Intermediate products kept for inspection and debug dumps.
struct SurfaceAnalysis {
  SmoothedSurface surface;
  CurvatureMap curvature;
  ShapeIndexMap shape;
  TopologyMap topology;
  std::vector<TsdSample> tsd;
};

SurfaceAnalysis analyze_surface(const DepthMap& map, const PipelineConfig& config);

/// Applies depth_sign and downsampling.
DepthMap preprocess(const DepthMap& raw, const PipelineConfig& config);

/// Global blocks and BSP descriptors for one image.
ImageFeatures extract_image(const DepthMap& raw, const PipelineConfig& config);

/// Zero blocks of the configured sizes (used for failed images).
ImageFeatures zero_features(const PipelineConfig& config);

/// Samples up to `sample_cap` descriptors from `images` (deterministically in
/// `seed`) and clusters them into a codebook.
Codebook learn_codebook(std::span<const ImageFeatures* const> images, const PipelineConfig& config,
                        std::uint64_t seed);

/// LLC codes of every BSP descriptor, sum-pooled (length K).
std::vector<double> encode_bsp(const ImageFeatures& image, const Codebook& codebook,
                               const PipelineConfig& config);

/// Fused vector for one image. `codebook` may be null only when the feature
/// set excludes BSP.
FeatureVector encode_image(const ImageFeatures& image, const Codebook* codebook,
                           const PipelineConfig& config);

/// Cross-validation over precomputed image features; codebooks and SVMs are
/// re-fitted on the training folds only.
CvReport crossval_images(const std::vector<ImageFeatures>& images, std::span<const int> labels,
                         std::span<const std::string> items,
                         const std::vector<std::string>& classes, const PipelineConfig& config);

}  // namespace clothkit
