#include "clothkit/features.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

#include "clothkit/bspline.hpp"
#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit {

std::string_view to_string(Block block) noexcept {
  switch (block) {
    case Block::Lbp: return "lbp";
    case Block::Si: return "si";
    case Block::Tsd: return "tsd";
    case Block::Bsp: return "bsp";
  }
  return "?";
}

FeatureSet FeatureSet::parse(std::string_view text) {
  if (text == "all" || text == "lstb") return all();
  FeatureSet set;
  const bool named = text.find_first_of(",+") != std::string_view::npos || text == "lbp" ||
                     text == "si" || text == "tsd" || text == "bsp";
  if (named) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = std::min(text.find_first_of(",+", pos), text.size());
      const auto name = text.substr(pos, end - pos);
      if (name == "lbp") set = set.with(Block::Lbp);
      else if (name == "si") set = set.with(Block::Si);
      else if (name == "tsd") set = set.with(Block::Tsd);
      else if (name == "bsp") set = set.with(Block::Bsp);
      else throw Error(ErrorKind::Config, "unknown feature block '" + std::string(name) + "'");
      pos = end + 1;
    }
  } else {
    for (const char c : text) {
      switch (c) {
        case 'l': set = set.with(Block::Lbp); break;
        case 's': set = set.with(Block::Si); break;
        case 't': set = set.with(Block::Tsd); break;
        case 'b': set = set.with(Block::Bsp); break;
        default: throw Error(ErrorKind::Config, "unknown feature set '" + std::string(text) + "'");
      }
    }
  }
  if (set.empty()) throw Error(ErrorKind::Config, "feature set is empty");
  return set;
}

std::vector<Block> FeatureSet::blocks() const {
  std::vector<Block> out;
  for (const auto b : {Block::Lbp, Block::Si, Block::Tsd, Block::Bsp}) {
    if (has(b)) out.push_back(b);
  }
  return out;
}

std::string FeatureSet::name() const {
  std::string out;
  for (const auto b : blocks()) {
    if (!out.empty()) out += '+';
    out += to_string(b);
  }
  return out;
}

bool l2_normalize(std::span<double> values) {
  double sq = 0;
  for (const double v : values) sq += v * v;
  if (!(sq > 0) || !std::isfinite(sq)) {
    std::fill(values.begin(), values.end(), 0.0);
    return false;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : values) v *= inv;
  return true;
}

GlobalFeature si_histogram(const ShapeIndexMap& shape) {
  GlobalFeature f{Block::Si, std::vector<double>(kSurfaceClassCount, 0.0)};
  for (int y = 0; y < shape.height(); ++y) {
    for (int x = 0; x < shape.width(); ++x) {
      const auto c = shape.cls(x, y);
      if (shape.valid(x, y) && c != SurfaceClass::Undefined) f.values[static_cast<std::size_t>(c)] += 1;
    }
  }
  if (!l2_normalize(f.values)) diagnose("shape index histogram is empty");
  return f;
}

// ---------------------------------------------------------------------------
// LBP

namespace {

int circular_transitions(std::uint8_t code) {
  const auto rotated = static_cast<std::uint8_t>((code >> 1) | (code << 7));
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

const std::array<int, 256>& uniform_table() {
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    int next = 0;
    for (int c = 0; c < 256; ++c) {
      t[static_cast<std::size_t>(c)] = circular_transitions(static_cast<std::uint8_t>(c)) <= 2 ? next++ : -1;
    }
    return t;
  }();
  return table;
}

constexpr std::array<int, 8> kLbpDx{1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kLbpDy{0, -1, -1, -1, 0, 1, 1, 1};

}  // namespace

int uniform_pattern_bin(std::uint8_t code) noexcept { return uniform_table()[code]; }

std::uint8_t lbp_code(const Grid<double>& image, int x, int y) noexcept {
  const double c = image(x, y);
  unsigned code = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    if (image(x + kLbpDx[k], y + kLbpDy[k]) >= c) code |= 1U << k;
  }
  return static_cast<std::uint8_t>(code);
}

std::vector<DepthMap> gaussian_pyramid(const DepthMap& map, int levels, double sigma) {
  if (levels < 1) throw Error(ErrorKind::Config, "pyramid needs at least one level");
  if (!(sigma > 0)) throw Error(ErrorKind::Config, "pyramid sigma must be > 0");
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }

  std::vector<DepthMap> out{map};
  for (int l = 1; l < levels; ++l) {
    const auto& src = out.back();
    const int w = (src.width() + 1) / 2;
    const int h = (src.height() + 1) / 2;
    DepthMap next(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int sx = 2 * x;
        const int sy = 2 * y;
        if (!src.valid(sx, sy)) {
          next.mask(x, y) = 0;
          continue;
        }
        double num = 0, den = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            const int px = sx + dx;
            const int py = sy + dy;
            if (!src.depth.contains(px, py) || !src.mask(px, py)) continue;
            const double g = kernel[static_cast<std::size_t>(dx + radius)] * kernel[static_cast<std::size_t>(dy + radius)];
            num += g * src.depth(px, py);
            den += g;
          }
        }
        next.depth(x, y) = num / den;
      }
    }
    out.push_back(std::move(next));
  }
  return out;
}

GlobalFeature lbp_histogram(const DepthMap& raw, const LbpOptions& options) {
  const auto pyramid = gaussian_pyramid(raw, options.levels, options.sigma);
  GlobalFeature f{Block::Lbp, std::vector<double>(static_cast<std::size_t>(kUniformPatterns * options.levels), 0.0)};
  for (int l = 0; l < options.levels; ++l) {
    const auto& level = pyramid[static_cast<std::size_t>(l)];
    double* hist = f.values.data() + static_cast<std::ptrdiff_t>(l) * kUniformPatterns;
    for (int y = 1; y + 1 < level.height(); ++y) {
      for (int x = 1; x + 1 < level.width(); ++x) {
        bool full = true;
        for (int dy = -1; dy <= 1 && full; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!level.mask(x + dx, y + dy)) {
              full = false;
              break;
            }
          }
        }
        if (!full) continue;
        const int bin = uniform_pattern_bin(lbp_code(level.depth, x, y));
        if (bin >= 0) hist[bin] += 1;
      }
    }
  }
  if (!l2_normalize(f.values)) diagnose("LBP histogram is empty");
  return f;
}

// ---------------------------------------------------------------------------
// TSD

GlobalFeature tsd_histogram(std::span<const TsdSample> samples, const TsdHistogramOptions& options) {
  if (options.bins < 1 || !(options.hi > options.lo)) {
    throw Error(ErrorKind::Config, "TSD histogram needs bins >= 1 and hi > lo");
  }
  const int n = options.bins;
  GlobalFeature f{Block::Tsd, std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
  const auto bin = [&](double v) {
    const int b = static_cast<int>(std::floor((v - options.lo) / (options.hi - options.lo) * n));
    return std::min(b, n - 1);
  };
  for (const auto& s : samples) {
    if (!(s.width >= options.lo && s.width <= options.hi)) continue;
    if (!(s.height >= options.lo && s.height <= options.hi)) continue;
    f.values[static_cast<std::size_t>(bin(s.width) * n + bin(s.height))] += 1;
  }
  if (!l2_normalize(f.values)) diagnose("TSD histogram is empty (all samples out of range)");
  return f;
}

// ---------------------------------------------------------------------------
// BSP

void BspOptions::check() const {
  if (order < 2 || order > 8) throw Error(ErrorKind::Config, "bsp order must lie in [2, 8]");
  if (controls < order) throw Error(ErrorKind::Config, "bsp_controls must be >= the spline order");
  if (patch < controls || patch % 2 == 0) {
    throw Error(ErrorKind::Config, "bsp_patch must be odd and at least bsp_controls");
  }
  if (stride < 1) throw Error(ErrorKind::Config, "bsp_stride must be >= 1");
}

std::vector<BspDescriptor> bsp_descriptors(const Grid<double>& smoothed, const Mask& mask,
                                           const TopologyMap& topology, const BspOptions& options) {
  options.check();
  const int w = smoothed.width();
  const int h = smoothed.height();
  if (mask.width() != w || mask.height() != h || topology.width != w || topology.height != h) {
    throw Error(ErrorKind::Consistency, "BSP inputs differ in size");
  }

  // Summed-area table of invalid pixels for O(1) window checks.
  Grid<int> holes(w + 1, h + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      holes(x + 1, y + 1) = (mask(x, y) ? 0 : 1) + holes(x, y + 1) + holes(x + 1, y) - holes(x, y);
    }
  }
  const int r = options.patch / 2;
  std::vector<Pixel> anchors;
  for (std::size_t i = 0; i < topology.ridges.size(); i += static_cast<std::size_t>(options.stride)) {
    const auto& p = topology.ridges[i];
    const int x0 = p.x - r, y0 = p.y - r, x1 = p.x + r + 1, y1 = p.y + r + 1;
    if (x0 < 0 || y0 < 0 || x1 > w || y1 > h) continue;
    if (holes(x1, y1) - holes(x0, y1) - holes(x1, y0) + holes(x0, y0) != 0) continue;
    anchors.push_back(p);
  }
  if (anchors.empty()) {
    diagnose("no BSP anchors: no ridge pixel has a full patch inside the mask");
    return {};
  }

  const auto knots = KnotVector::open_uniform(options.order, options.controls);
  const PatchFitter fitter(options.patch, options.patch, knots, knots);
  const std::size_t centre = static_cast<std::size_t>((options.controls / 2) * options.controls + options.controls / 2);
  std::vector<BspDescriptor> out(anchors.size());
  parallel_for(anchors.size(), [&](std::size_t a) {
    const auto& p = anchors[a];
    std::vector<double> samples(static_cast<std::size_t>(options.patch * options.patch));
    for (int y = 0; y < options.patch; ++y) {
      for (int x = 0; x < options.patch; ++x) {
        samples[static_cast<std::size_t>(y * options.patch + x)] = smoothed(p.x - r + x, p.y - r + y);
      }
    }
    const auto fit = fitter.fit(samples, PixelRect{p.x - r, p.y - r, options.patch, options.patch});
    const auto c = fit.controls();
    auto& d = out[a];
    d.anchor = p;
    d.values.assign(c.begin(), c.end());
    const double mid = d.values[centre];
    for (double& v : d.values) v -= mid;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Fusion

std::size_t fused_dimension(FeatureSet set, const LbpOptions& lbp_options,
                            const TsdHistogramOptions& tsd_options, int codebook_size) {
  std::size_t d = 0;
  if (set.has(Block::Lbp)) d += static_cast<std::size_t>(kUniformPatterns * lbp_options.levels);
  if (set.has(Block::Si)) d += kSurfaceClassCount;
  if (set.has(Block::Tsd)) d += static_cast<std::size_t>(tsd_options.bins * tsd_options.bins);
  if (set.has(Block::Bsp)) d += static_cast<std::size_t>(codebook_size);
  return d;
}

FeatureVector fuse(const GlobalFeature& lbp, const GlobalFeature& si, const GlobalFeature& tsd,
                   std::span<const double> pooled, FeatureSet set, const LbpOptions& lbp_options,
                   const TsdHistogramOptions& tsd_options, int codebook_size) {
  const auto append = [](std::vector<double>& out, std::span<const double> block, std::size_t expected,
                         Block which) {
    if (block.size() != expected) {
      throw Error(ErrorKind::Dimension, std::string(to_string(which)) + " block has " +
                                            std::to_string(block.size()) + " values, expected " +
                                            std::to_string(expected));
    }
    out.insert(out.end(), block.begin(), block.end());
  };
  FeatureVector v{set, {}};
  v.values.reserve(fused_dimension(set, lbp_options, tsd_options, codebook_size));
  if (set.has(Block::Lbp)) append(v.values, lbp.values, static_cast<std::size_t>(kUniformPatterns * lbp_options.levels), Block::Lbp);
  if (set.has(Block::Si)) append(v.values, si.values, kSurfaceClassCount, Block::Si);
  if (set.has(Block::Tsd)) append(v.values, tsd.values, static_cast<std::size_t>(tsd_options.bins * tsd_options.bins), Block::Tsd);
  if (set.has(Block::Bsp)) append(v.values, pooled, static_cast<std::size_t>(codebook_size), Block::Bsp);
  return v;
}

}  // namespace clothkit
