#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clothkit/depthio.hpp"
#include "clothkit/geometry.hpp"
#include "clothkit/grid.hpp"
#include "clothkit/topology.hpp"

namespace clothkit {

/// Feature blocks in fused order.
enum class Block : std::uint8_t { Lbp, Si, Tsd, Bsp };

std::string_view to_string(Block block) noexcept;

/// Subset of blocks, always iterated in L-S-T-B order.
class FeatureSet {
 public:
  FeatureSet() = default;
  static FeatureSet all() { return FeatureSet(0b1111); }
  /// Accepts `lstb`, `all`, a subset of the letters `l s t b`, or a list of
  /// block names separated by `,` or `+` (e.g. `lbp+si`).
  static FeatureSet parse(std::string_view text);

  bool has(Block block) const noexcept { return (bits_ >> static_cast<int>(block)) & 1U; }
  FeatureSet with(Block block) const noexcept {
    return FeatureSet(bits_ | (1U << static_cast<int>(block)));
  }
  bool empty() const noexcept { return bits_ == 0; }
  std::vector<Block> blocks() const;
  /// Canonical name, e.g. `lbp+si+tsd+bsp`.
  std::string name() const;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;

 private:
  explicit FeatureSet(unsigned bits) : bits_(bits) {}
  unsigned bits_ = 0;
};

/// An L2-normalized global histogram (all-zero when its input was empty).
struct GlobalFeature {
  Block block = Block::Si;
  std::vector<double> values;
};

/// Scales `values` to unit L2 norm; returns false (leaving zeros) when the
/// norm is zero.
bool l2_normalize(std::span<double> values);

/// Nine-bin class histogram over valid pixels with a defined class.
GlobalFeature si_histogram(const ShapeIndexMap& shape);

struct LbpOptions {
  int levels = 3;
  double sigma = 0.375;
};

inline constexpr int kUniformPatterns = 58;

/// Bin index of an 8-bit LBP code among the 58 uniform patterns (at most two
/// circular 0/1 transitions), or -1 for a non-uniform code.
int uniform_pattern_bin(std::uint8_t code) noexcept;

/// 8-neighbour LBP code at (x, y): bit k set when neighbour k >= centre.
/// Neighbours run counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
std::uint8_t lbp_code(const Grid<double>& image, int x, int y) noexcept;

/// Gaussian pyramid level l+1 = every other pixel of level l blurred with
/// `sigma`, using normalized convolution over valid pixels.
std::vector<DepthMap> gaussian_pyramid(const DepthMap& map, int levels, double sigma);

/// Per-level uniform-pattern histograms on the raw depth map, concatenated
/// (58 x levels) and L2-normalized as a whole. Codes are taken only where the
/// full 3x3 neighbourhood is valid.
GlobalFeature lbp_histogram(const DepthMap& raw, const LbpOptions& options = {});

struct TsdHistogramOptions {
  double lo = 5.0;
  double hi = 50.0;
  int bins = 10;
};

/// bins x bins histogram over (width px, height mm), row index = width bin.
/// Samples outside [lo, hi] on either axis are dropped.
GlobalFeature tsd_histogram(std::span<const TsdSample> samples,
                            const TsdHistogramOptions& options = {});

struct BspDescriptor {
  std::vector<double> values;  // controls x controls, row-major, centre = 0
  Pixel anchor;
};

struct BspOptions {
  int patch = 41;
  int stride = 8;
  int controls = 5;
  int order = 4;

  void check() const;
};

/// B-spline patch descriptors on every stride-th ridge pixel (row-major
/// order) whose patch lies fully inside the mask. Each descriptor is the
/// fitted control grid minus its centre control value.
std::vector<BspDescriptor> bsp_descriptors(const Grid<double>& smoothed, const Mask& mask,
                                           const TopologyMap& topology,
                                           const BspOptions& options = {});

/// Fused L-S-T-B representation.
struct FeatureVector {
  FeatureSet set;
  std::vector<double> values;
};

/// Concatenates the blocks selected by `set` in L-S-T-B order. Blocks are
/// copied as-is (no re-normalization). Throws Dimension when a selected block
/// has the wrong length.
FeatureVector fuse(const GlobalFeature& lbp, const GlobalFeature& si, const GlobalFeature& tsd,
                   std::span<const double> pooled, FeatureSet set, const LbpOptions& lbp_options,
                   const TsdHistogramOptions& tsd_options, int codebook_size);

/// Fused dimension: 58*levels + 9 + bins^2 + K for the selected blocks.
std::size_t fused_dimension(FeatureSet set, const LbpOptions& lbp_options,
                            const TsdHistogramOptions& tsd_options, int codebook_size);

// ---------------------------------------------------------------------------
// Feature files.

struct FeatureRecord {
  std::string item_id;
  std::string label;
  std::vector<double> values;
};

struct FeatureFile {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string feature_set;
  std::size_t dimension = 0;
  std::vector<FeatureRecord> records;
};

/// CSV: a `# clothkit-features ...` metadata line, a header
/// `item,label,dim,values`, then one `item,label,D,v1..vD` row per record.
void save_features_csv(const std::filesystem::path& path, const FeatureFile& file);
FeatureFile load_features_csv(const std::filesystem::path& path);

/// Little-endian binary with magic `LSTB1`.
void save_features_binary(const std::filesystem::path& path, const FeatureFile& file);
FeatureFile load_features_binary(const std::filesystem::path& path);

/// Dispatches on the leading magic bytes.
FeatureFile load_features(const std::filesystem::path& path);

}  // namespace clothkit
