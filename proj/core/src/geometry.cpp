#include "clothkit/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit {

PrincipalCurvatures principal_curvatures(const SurfaceJet& jet, double pitch) {
  const double p = jet.zx / pitch;
  const double q = jet.zy / pitch;
  const double r = jet.zxx / (pitch * pitch);
  const double s = jet.zxy / (pitch * pitch);
  const double t = jet.zyy / (pitch * pitch);

  const double e = 1 + p * p;
  const double f = p * q;
  const double g = 1 + q * q;
  const double w = std::sqrt(1 + p * p + q * q);
  const double l = r / w;
  const double m = s / w;
  const double n = t / w;

  const double det = e * g - f * f;
  const double mean = (e * n - 2 * f * m + g * l) / (2 * det);
  const double gauss = (l * n - m * m) / det;
  const double root = std::sqrt(std::max(0.0, mean * mean - gauss));

  PrincipalCurvatures pc;
  pc.k_min = mean - root;
  pc.k_max = mean + root;
  const double k = std::abs(pc.k_min) >= std::abs(pc.k_max) ? pc.k_min : pc.k_max;

  // Null vector of (II - k I): take whichever row is better conditioned.
  const double a0 = l - k * e, b0 = m - k * f;
  const double a1 = m - k * f, b1 = n - k * g;
  double dx = 1, dy = 0;
  if (a0 * a0 + b0 * b0 >= a1 * a1 + b1 * b1) {
    if (a0 != 0 || b0 != 0) dx = -b0, dy = a0;
  } else {
    dx = b1, dy = -a1;
  }
  const double len = std::hypot(dx, dy);
  if (len > 0 && std::isfinite(len)) {
    dx /= len;
    dy /= len;
  } else {
    dx = 1;
    dy = 0;
  }
  if (dx < 0 || (dx == 0 && dy < 0)) {
    dx = -dx;
    dy = -dy;
  }
  pc.dir_x = dx;
  pc.dir_y = dy;
  return pc;
}

double CurvatureMap::dominant(int x, int y) const {
  return std::max(std::abs(k_min(x, y)), std::abs(k_max(x, y)));
}

CurvatureMap principal_curvatures(const SmoothedSurface& surface, double pitch) {
  if (!(pitch > 0)) throw Error(ErrorKind::Config, "pixel pitch must be > 0");
  const int w = surface.width();
  const int h = surface.height();
  CurvatureMap cm{Grid<double>(w, h), Grid<double>(w, h), Grid<double>(w, h, 1.0),
                  Grid<double>(w, h), Mask(w, h)};
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      if (!surface.mask(x, y)) continue;
      const auto jet = surface.jet(x, y);
      const auto pc = principal_curvatures(jet, pitch);
      if (!std::isfinite(pc.k_min) || !std::isfinite(pc.k_max)) continue;
      cm.k_min(x, y) = pc.k_min;
      cm.k_max(x, y) = pc.k_max;
      cm.dir_x(x, y) = pc.dir_x;
      cm.dir_y(x, y) = pc.dir_y;
      cm.valid(x, y) = 1;
    }
  });
  return cm;
}

std::string_view to_string(SurfaceClass c) noexcept {
  switch (c) {
    case SurfaceClass::Cup: return "cup";
    case SurfaceClass::Trough: return "trough";
    case SurfaceClass::Rut: return "rut";
    case SurfaceClass::SaddleRut: return "saddle_rut";
    case SurfaceClass::Saddle: return "saddle";
    case SurfaceClass::SaddleRidge: return "saddle_ridge";
    case SurfaceClass::Ridge: return "ridge";
    case SurfaceClass::Dome: return "dome";
    case SurfaceClass::Cap: return "cap";
    case SurfaceClass::Undefined: break;
  }
  return "undefined";
}

QuantizationScheme parse_quantization_scheme(std::string_view name) {
  if (name == "equal" || name == "equal_width") return QuantizationScheme::EqualWidth;
  if (name == "koenderink") return QuantizationScheme::Koenderink;
  throw Error(ErrorKind::Config, "unknown shape index scheme '" + std::string(name) +
                                     "' (expected equal_width or koenderink)");
}

std::string_view to_string(QuantizationScheme scheme) noexcept {
  return scheme == QuantizationScheme::Koenderink ? "koenderink" : "equal_width";
}

double shape_index(double k_min, double k_max) noexcept {
  if (k_min == k_max) {
    if (k_min == 0) return 0.0;
    return k_min > 0 ? -1.0 : 1.0;
  }
  return 2.0 / std::numbers::pi * std::atan((k_min + k_max) / (k_min - k_max));
}

SurfaceClass quantize_shape_index(double s, QuantizationScheme scheme) noexcept {
  if (!(s >= -1.0 && s <= 1.0)) return SurfaceClass::Undefined;
  // Compare against the breakpoints directly; floor((s + 1) * 4.5) misrounds next to them.
  static const std::array<double, 8> kEqual = [] {
    std::array<double, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = -1.0 + 2.0 * (i + 1) / 9.0;
    return b;
  }();
  static constexpr std::array<double, 8> kKoenderink{-7.0 / 8, -5.0 / 8, -3.0 / 8, -1.0 / 8,
                                                     1.0 / 8,  3.0 / 8,  5.0 / 8,  7.0 / 8};
  const auto& breaks = scheme == QuantizationScheme::EqualWidth ? kEqual : kKoenderink;
  const int idx = static_cast<int>(std::upper_bound(breaks.begin(), breaks.end(), s) - breaks.begin());
  return static_cast<SurfaceClass>(std::clamp(idx, 0, kSurfaceClassCount - 1));
}

ShapeIndexMap shape_index(const CurvatureMap& curvature, QuantizationScheme scheme) {
  const int w = curvature.width();
  const int h = curvature.height();
  ShapeIndexMap out{Grid<double>(w, h), Grid<SurfaceClass>(w, h, SurfaceClass::Undefined), curvature.valid};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!curvature.valid(x, y)) continue;
      const double lo = curvature.k_min(x, y);
      const double hi = curvature.k_max(x, y);
      const double s = shape_index(lo, hi);
      out.s(x, y) = s;
      out.cls(x, y) = lo == 0 && hi == 0 ? SurfaceClass::Undefined : quantize_shape_index(s, scheme);
    }
  }
  return out;
}

ShapeIndexMap majority_rank_filter(const ShapeIndexMap& map, int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorKind::Config, "majority filter window must be odd and >= 3, got " + std::to_string(window));
  }
  const int w = map.width();
  const int h = map.height();
  const int r = window / 2;
  ShapeIndexMap out = map;
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      if (!map.valid(x, y)) continue;
      std::array<int, kSurfaceClassCount> votes{};
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          if (!map.valid(xx, yy)) continue;
          const auto c = map.cls(xx, yy);
          if (c != SurfaceClass::Undefined) ++votes[static_cast<std::size_t>(c)];
        }
      }
      const auto best = std::max_element(votes.begin(), votes.end());
      if (*best > 0) out.cls(x, y) = static_cast<SurfaceClass>(best - votes.begin());
    }
  });
  return out;
}

void save_class_pgm(const std::filesystem::path& path, const ShapeIndexMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (const auto c : map.cls.values()) out.put(static_cast<char>(static_cast<int>(c) * 25));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace clothkit
