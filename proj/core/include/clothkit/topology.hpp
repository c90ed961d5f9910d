#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "clothkit/bspline.hpp"
#include "clothkit/geometry.hpp"
#include "clothkit/grid.hpp"

namespace clothkit {

using BinaryMap = Grid<std::uint8_t>;

/// Ridge candidates: dominant curvature magnitude above any threshold and a
/// ridge-like class (saddle ridge, ridge, dome, cap). Not thinned.
BinaryMap detect_ridges(const CurvatureMap& curvature, const ShapeIndexMap& shape,
                        std::span<const double> thresholds);

struct ContourOptions {
  /// Minimum change (1/mm) of the second directional derivative across a
  /// sign change; suppresses crossings of numerically flat regions.
  double min_jump = 1e-3;
  double pitch = 1.0;
};

/// Zero-crossings of the second directional derivative taken along each
/// pixel's dominant principal direction. Of each crossing 4-neighbour pair the
/// pixel closer to zero is marked. Not thinned.
BinaryMap detect_contours(const SmoothedSurface& surface, const CurvatureMap& curvature,
                          const ContourOptions& options = {});

/// Zhang-Suen thinning with a simple-point guard, followed by removal of
/// redundant pixels from 2x2 blocks. The result is a subset of the input, has
/// no solid 2x2 block, preserves 8-connected component count, and is a fixed
/// point of `thin`.
BinaryMap thin(const BinaryMap& map);

struct TopologyMap {
  int width = 0;
  int height = 0;
  std::vector<Pixel> ridges;    // row-major order
  std::vector<Pixel> contours;  // row-major order
  Grid<double> depth;           // smoothed depth, mm

  static TopologyMap from_maps(const BinaryMap& ridges, const BinaryMap& contours,
                               Grid<double> depth);
};

struct TsdSample {
  double width = 0;   // pixels
  double height = 0;  // mm, ridge depth minus contour depth
  Pixel ridge;
  Pixel contour;
};

/// One sample per ridge pixel, pairing it with its nearest contour pixel
/// (exact Euclidean distance transform; ties go to the row-major-first contour
/// pixel). Empty when there are no contour pixels.
std::vector<TsdSample> tsd_distances(const TopologyMap& topology);

/// Squared Euclidean distance to the nearest set pixel, for every pixel.
/// Unset everywhere yields +infinity.
Grid<double> squared_distance_transform(const BinaryMap& features);

/// Debug overlay: ridges 255, contours 128, background 0.
void save_topology_overlay(const std::filesystem::path& path, const TopologyMap& topology);

}  // namespace clothkit
