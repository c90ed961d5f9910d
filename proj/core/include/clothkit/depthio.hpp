#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clothkit/config.hpp"
#include "clothkit/grid.hpp"

namespace clothkit {

/// Depth raster in millimetres plus a garment mask (nonzero = garment).
struct DepthMap {
  Grid<double> depth;
  Mask mask;

  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0)
      : depth(width, height, fill), mask(width, height, 1) {}

  int width() const noexcept { return depth.width(); }
  int height() const noexcept { return depth.height(); }
  bool valid(int x, int y) const noexcept { return mask(x, y) != 0; }

  /// Throws Consistency when the grids disagree or a masked pixel holds a
  /// non-finite depth. With `require_analysis_size`, also rejects maps smaller
  /// than 16x16.
  void check(bool require_analysis_size = false) const;

  bool operator==(const DepthMap&) const = default;
};

inline constexpr int kMinAnalysisSide = 16;

/// Reads a 16-bit binary PGM (P5, big-endian samples, 1 unit = 1 mm) and an
/// optional 8-bit PGM mask. Without a mask every pixel is garment.
DepthMap load_depth(const std::filesystem::path& depth_path,
                    const std::optional<std::filesystem::path>& mask_path = std::nullopt);

/// Writes the canonical P5 form: "P5\n<w> <h>\n65535\n" followed by samples.
/// Depths are rounded to the nearest millimetre and clamped to [0, 65535].
void save_depth(const std::filesystem::path& path, const DepthMap& map);
/// Writes the mask as an 8-bit P5 file with values 0 / 255.
void save_mask(const std::filesystem::path& path, const DepthMap& map);

/// Block-average downsampling over valid pixels (preprocessing resize).
DepthMap downsample(const DepthMap& map, int factor);

struct ManifestEntry {
  std::string depth_path;
  std::string mask_path;  // empty: no mask
  std::string label;
  std::string item_id;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> categories;
  /// Relative entry paths resolve against this directory.
  std::filesystem::path base_dir;

  int category_index(const std::string& label) const;
  std::filesystem::path resolve(const std::string& path) const;
  DepthMap load_entry(std::size_t i) const;
};

/// Parses a `depth,mask,label,item` CSV (columns in any order). An optional
/// leading `# categories=a,b,c` line fixes the category order; otherwise the
/// order of first appearance is used. Files are not touched at parse time.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {});
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Synthetic wrinkled surfaces.

/// Straight ridge spine with a Gaussian cross-section.
struct RidgeSegment {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double sigma = 1.0;   // cross-section std, pixels
  double height = 1.0;  // crest amplitude, mm
};

struct SynthSpec {
  int class_id = 0;
  int width = 256;
  int height = 256;
  int wrinkles_min = 3;
  int wrinkles_max = 6;
  double ridge_width_sigma = 6.0;  // pixels
  double ridge_height = 10.0;      // mm
  double base_depth = 800.0;       // mm
  double noise_sigma = 0.0;        // mm
  /// Per-wrinkle relative jitter of sigma / height (uniform in [1-j, 1+j]).
  double width_jitter = 0.0;
  double height_jitter = 0.0;
  /// Ridge spine length as a fraction of min(width, height).
  double length_min = 0.3;
  double length_max = 0.8;
  std::uint64_t seed = 0;

  void check() const;
};

/// Base plane plus ridge profiles (pointwise max where ridges overlap).
DepthMap render_ridges(int width, int height, double base_depth,
                       const std::vector<RidgeSegment>& ridges);

/// Deterministic in `spec`: wrinkle spines are drawn from `spec.seed`, then
/// white noise of `noise_sigma` is added. Full mask.
DepthMap synth_surface(const SynthSpec& spec);

/// Reads SynthSpec fields from flat keys (`ridge_width_sigma`, `seed`, ...),
/// using `prefix` + key first and falling back to the bare key.
SynthSpec synth_spec_from_config(const KeyValueConfig& config, const std::string& prefix = {});

/// Labelled synthetic dataset. Consecutive groups of `samples_per_item`
/// samples form one item; an item scales its class's ridge sigma and height
/// by factors drawn uniformly from [1-item_jitter, 1+item_jitter].
struct SynthDatasetSpec {
  std::vector<std::string> classes;
  std::vector<SynthSpec> per_class;
  int samples_per_item = 5;
  double item_jitter = 0.1;
  std::uint64_t seed = 0;

  void check() const;
};

/// Three classes `narrow`, `medium`, `wide` (sigma 4/8/14 px, height
/// 15/25/35 mm, 10-16 wrinkles, 0.3 mm noise).
SynthDatasetSpec default_synth_dataset();

/// Keys: `classes=a,b,...`, `samples_per_item`, `item_jitter`, `seed`, plus
/// SynthSpec keys either bare (all classes) or as `<class>.<key>`. Missing
/// keys fall back to default_synth_dataset() when its class names are used.
SynthDatasetSpec synth_dataset_from_config(const KeyValueConfig& config);

struct SynthSample {
  DepthMap map;
  int class_index = 0;
  std::string item_id;
};

/// Sample `index` of class `class_index`; a pure function of its arguments.
SynthSample synth_sample(const SynthDatasetSpec& spec, int class_index, int index);

}  // namespace clothkit
