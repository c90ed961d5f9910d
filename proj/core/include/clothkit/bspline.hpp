#pragma once

#include <memory>
#include <span>
#include <vector>

#include "clothkit/depthio.hpp"
#include "clothkit/grid.hpp"

namespace clothkit {

/// Knot vector of a B-spline of the given order (degree + 1).
struct KnotVector {
  int order = 4;
  std::vector<double> knots;

  /// Open uniform knots 0,..,0,1,2,..,s,..,s with `order` repeats at each end,
  /// where s = controls - order + 1. open_uniform(4, 5) is [0 0 0 0 1 2 2 2 2].
  static KnotVector open_uniform(int order, int controls);

  int degree() const noexcept { return order - 1; }
  int controls() const noexcept { return static_cast<int>(knots.size()) - order; }
  double domain_begin() const { return knots[static_cast<std::size_t>(order - 1)]; }
  double domain_end() const { return knots[static_cast<std::size_t>(controls())]; }

  /// Throws Domain if knots decrease or there are too few of them.
  void check() const;

  /// Greville abscissae (control-point parameter locations).
  std::vector<double> greville() const;
};

/// All `controls()` basis weights at t (Cox-de Boor). Throws Domain when t is
/// outside [domain_begin, domain_end].
std::vector<double> basis_values(const KnotVector& kv, double t);

/// Nonzero basis functions and their derivatives at t.
/// `out[d * order + j]` is the d-th derivative of basis `first + j`.
/// Returns `first`.
int basis_derivatives(const KnotVector& kv, double t, int max_derivative, std::span<double> out);

/// Axis-aligned pixel rectangle.
struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool contains(double px, double py) const noexcept {
    return px >= x && py >= y && px <= x + width - 1 && py <= y + height - 1;
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Depth and its partial derivatives with respect to pixel x (column) and
/// y (row).
struct SurfaceJet {
  double z = 0, zx = 0, zy = 0, zxx = 0, zxy = 0, zyy = 0;
};

/// Tensor-product B-spline fitted over a pixel rectangle. Pixel coordinates
/// map affinely onto the knot domain of each axis.
class FittedSurface {
 public:
  FittedSurface(KnotVector knots_x, KnotVector knots_y, std::vector<double> controls,
                PixelRect domain, double residual_rms);

  const KnotVector& knots_x() const noexcept { return knots_x_; }
  const KnotVector& knots_y() const noexcept { return knots_y_; }
  const PixelRect& domain() const noexcept { return domain_; }
  double residual_rms() const noexcept { return residual_rms_; }

  int controls_x() const noexcept { return knots_x_.controls(); }
  int controls_y() const noexcept { return knots_y_.controls(); }
  /// Control depth at column i (x) and row j (y).
  double control(int i, int j) const { return controls_[static_cast<std::size_t>(j * controls_x() + i)]; }
  std::span<const double> controls() const noexcept { return controls_; }

  /// d^(dx+dy) z / dx^dx dy^dy at pixel (x, y); dx + dy <= 2.
  double evaluate(double x, double y, int dx = 0, int dy = 0) const;
  SurfaceJet jet(double x, double y) const;

 private:
  double to_u(double x) const;
  double to_v(double y) const;

  KnotVector knots_x_;
  KnotVector knots_y_;
  std::vector<double> controls_;
  PixelRect domain_;
  double residual_rms_;
  double scale_x_;
  double scale_y_;
};

double evaluate(const FittedSurface& surface, double x, double y, int dx, int dy);

/// Least-squares fitter for patches of a fixed size. Factorizations are
/// computed once, so fitting many equally sized patches is cheap.
class PatchFitter {
 public:
  PatchFitter(int width, int height, KnotVector knots_x, KnotVector knots_y);
  ~PatchFitter();
  PatchFitter(PatchFitter&&) noexcept;
  PatchFitter& operator=(PatchFitter&&) noexcept;

  int width() const noexcept;
  int height() const noexcept;

  /// Fits a fully valid patch; `samples` is row-major width*height.
  FittedSurface fit(std::span<const double> samples, PixelRect domain) const;

  /// Fits a patch with holes. `valid` marks usable samples. With
  /// smoothness > 0, a second-divided-difference penalty on the control grid
  /// (relative to the mean data weight) keeps unsupported controls bounded;
  /// it vanishes on bilinear surfaces, so planes are still reproduced.
  FittedSurface fit_masked(std::span<const double> samples, std::span<const std::uint8_t> valid,
                           PixelRect domain, double smoothness) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Least-squares fit of a B-spline surface to `rect` of a depth map, which
/// must be fully masked-valid. Throws Fit when the basis matrix is rank
/// deficient.
FittedSurface fit_patch(const DepthMap& map, PixelRect rect, const KnotVector& knots_x,
                        const KnotVector& knots_y);

struct PiecewiseOptions {
  int tile = 64;
  int overlap = 16;
  /// Pixels per knot span inside a tile.
  double knot_spacing = 3.0;
  double smoothness = 1e-6;

  void check() const;
};

/// Piece-wise fitted surface: per-pixel blended depth and derivatives, plus
/// the underlying tile fits.
struct SmoothedSurface {
  Grid<double> z, zx, zy, zxx, zxy, zyy;
  Mask mask;
  std::vector<FittedSurface> tiles;

  int width() const noexcept { return z.width(); }
  int height() const noexcept { return z.height(); }
  SurfaceJet jet(int x, int y) const {
    return {z(x, y), zx(x, y), zy(x, y), zxx(x, y), zxy(x, y), zyy(x, y)};
  }
  /// Index into `tiles` of the tile whose centre is nearest to (x, y).
  std::size_t tile_at(int x, int y) const;
  DepthMap as_depth_map() const;
};

/// Fits overlapping tiles and blends them with cosine tapers that vanish at
/// interior tile borders; weights are normalized, so the composite depth is
/// continuous. Derivatives are blended with the same weights.
SmoothedSurface fit_surface_piecewise(const DepthMap& map, const PiecewiseOptions& options = {});

}  // namespace clothkit
