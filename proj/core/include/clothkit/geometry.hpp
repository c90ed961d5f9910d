#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "clothkit/bspline.hpp"
#include "clothkit/grid.hpp"

namespace clothkit {

// Depth values are treated as a height field z = f(x, y): wrinkle crests are
// local maxima of the stored value. For sensor depth where nearer means
// smaller, negate the map first (pipeline key `depth_sign=-1`); otherwise the
// ridge/rut and dome/cup labels swap.

struct PrincipalCurvatures {
  double k_min = 0;
  double k_max = 0;
  /// Image-plane unit direction of the principal curvature with the larger
  /// magnitude.
  double dir_x = 1;
  double dir_y = 0;
};

/// Shape-operator eigen-analysis of the Monge patch z = f(x, y). `pitch` is
/// the pixel size in mm, so curvatures come out in 1/mm.
PrincipalCurvatures principal_curvatures(const SurfaceJet& jet, double pitch = 1.0);

struct CurvatureMap {
  Grid<double> k_min, k_max;
  Grid<double> dir_x, dir_y;
  Mask valid;

  int width() const noexcept { return k_min.width(); }
  int height() const noexcept { return k_min.height(); }
  /// max(|k_min|, |k_max|).
  double dominant(int x, int y) const;
};

CurvatureMap principal_curvatures(const SmoothedSurface& surface, double pitch = 1.0);

enum class SurfaceClass : std::uint8_t {
  Cup,
  Trough,
  Rut,
  SaddleRut,
  Saddle,
  SaddleRidge,
  Ridge,
  Dome,
  Cap,
  Undefined,
};

inline constexpr int kSurfaceClassCount = 9;

std::string_view to_string(SurfaceClass c) noexcept;

enum class QuantizationScheme {
  EqualWidth,  // nine intervals of width 2/9 over [-1, 1]
  Koenderink,  // breakpoints at +-1/8, +-3/8, +-5/8, +-7/8
};

QuantizationScheme parse_quantization_scheme(std::string_view name);
std::string_view to_string(QuantizationScheme scheme) noexcept;

/// S = (2/pi) atan((k_min + k_max) / (k_min - k_max)). For k_min == k_max the
/// limit is taken: 0 when flat, -sign(k) otherwise.
double shape_index(double k_min, double k_max) noexcept;

SurfaceClass quantize_shape_index(double s, QuantizationScheme scheme = QuantizationScheme::EqualWidth) noexcept;

struct ShapeIndexMap {
  Grid<double> s;
  Grid<SurfaceClass> cls;
  Mask valid;  // pixels with valid curvature

  int width() const noexcept { return s.width(); }
  int height() const noexcept { return s.height(); }
};

/// Per-pixel shape index and class. Flat pixels (k_min == k_max == 0) are
/// Undefined, as are invalid pixels.
ShapeIndexMap shape_index(const CurvatureMap& curvature,
                          QuantizationScheme scheme = QuantizationScheme::EqualWidth);

/// Replaces each valid pixel's class by the most frequent defined class in
/// its window; ties go to the lowest class index. S is untouched. Pixels whose
/// window holds no defined class keep their class. Throws Config for an even
/// or < 3 window.
ShapeIndexMap majority_rank_filter(const ShapeIndexMap& map, int window);

/// Debug dump: class index x 25 as an 8-bit PGM (Undefined = 225).
void save_class_pgm(const std::filesystem::path& path, const ShapeIndexMap& map);

}  // namespace clothkit
