#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "clothkit/bspline.hpp"
#include "clothkit/error.hpp"
#include "clothkit/geometry.hpp"

using namespace clothkit;

namespace {

// Shape operator I^-1 II of the Monge patch, eigen-decomposed numerically.
std::pair<double, double> curvature_oracle(const SurfaceJet& j) {
  Eigen::Matrix2d first, second;
  first << 1 + j.zx * j.zx, j.zx * j.zy, j.zx * j.zy, 1 + j.zy * j.zy;
  const double w = std::sqrt(1 + j.zx * j.zx + j.zy * j.zy);
  second << j.zxx / w, j.zxy / w, j.zxy / w, j.zyy / w;
  const Eigen::Matrix2d shape = first.inverse() * second;
  Eigen::EigenSolver<Eigen::Matrix2d> es(shape);
  double a = es.eigenvalues()[0].real(), b = es.eigenvalues()[1].real();
  if (a > b) std::swap(a, b);
  return {a, b};
}

SmoothedSurface smooth(const DepthMap& map) { return fit_surface_piecewise(map); }

ShapeIndexMap class_map(int w, int h, std::mt19937_64& rng, bool undefined = true) {
  ShapeIndexMap m{Grid<double>(w, h), Grid<SurfaceClass>(w, h), Mask(w, h, 1)};
  std::uniform_int_distribution<int> c(0, undefined ? kSurfaceClassCount : kSurfaceClassCount - 1);
  for (auto& v : m.cls.values()) v = static_cast<SurfaceClass>(c(rng));
  return m;
}

}  // namespace

TEST_CASE("principal curvatures agree with the shape-operator eigenvalues") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0, 1);
  for (int n = 0; n < 2000; ++n) {
    const SurfaceJet j{0, g(rng), g(rng), g(rng), g(rng), g(rng)};
    const auto pc = principal_curvatures(j);
    const auto [lo, hi] = curvature_oracle(j);
    CHECK(pc.k_min == doctest::Approx(lo).epsilon(1e-9).scale(1.0));
    CHECK(pc.k_max == doctest::Approx(hi).epsilon(1e-9).scale(1.0));
    CHECK(std::hypot(pc.dir_x, pc.dir_y) == doctest::Approx(1.0));
  }
}

TEST_CASE("principal direction is the eigenvector of the dominant curvature") {
  // z = a x^2 / 2 + b y^2 / 2 at the origin: directions are the axes
  const auto pc = principal_curvatures(SurfaceJet{0, 0, 0, 0.1, 0, -0.7});
  CHECK(pc.k_min == doctest::Approx(-0.7));
  CHECK(pc.k_max == doctest::Approx(0.1));
  CHECK(std::abs(pc.dir_x) < 1e-12);
  CHECK(pc.dir_y == doctest::Approx(1.0));
  // rotated cylinder: curvature across the 30 degree direction
  const double c = std::cos(std::numbers::pi / 6), s = std::sin(std::numbers::pi / 6);
  const auto r = principal_curvatures(SurfaceJet{0, 0, 0, -0.2 * c * c, -0.2 * c * s, -0.2 * s * s});
  CHECK(r.k_min == doctest::Approx(-0.2));
  CHECK(std::abs(r.k_max) < 1e-12);
  CHECK(r.dir_x == doctest::Approx(c));
  CHECK(r.dir_y == doctest::Approx(s));
}

TEST_CASE("pixel pitch scales curvature") {
  const SurfaceJet j{0, 0.3, -0.1, 0.05, 0.01, -0.02};
  const auto a = principal_curvatures(j, 1.0);
  // halving the pitch doubles slopes and quadruples second derivatives
  const SurfaceJet scaled{0, 0.6, -0.2, 0.2, 0.04, -0.08};
  const auto b = principal_curvatures(scaled, 2.0);
  CHECK(a.k_min == doctest::Approx(b.k_min));
  CHECK(a.k_max == doctest::Approx(b.k_max));
}

TEST_CASE("plane has zero curvature everywhere") {
  DepthMap map(70, 70);
  for (int y = 0; y < 70; ++y)
    for (int x = 0; x < 70; ++x) map.depth(x, y) = 300 + 0.2 * x + 0.1 * y;
  const auto cm = principal_curvatures(smooth(map));
  for (int y = 0; y < 70; ++y)
    for (int x = 0; x < 70; ++x) {
      CHECK(cm.valid(x, y));
      CHECK(std::abs(cm.k_min(x, y)) < 1e-9);
      CHECK(std::abs(cm.k_max(x, y)) < 1e-9);
    }
}

TEST_CASE("sphere cap curvature at the apex") {
  const double r = 100;
  DepthMap map(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double dx = x - 32, dy = y - 32;
      map.depth(x, y) = std::sqrt(r * r - dx * dx - dy * dy);
    }
  const auto cm = principal_curvatures(smooth(map));
  CHECK(cm.k_min(32, 32) == doctest::Approx(-1 / r).epsilon(0.02));
  CHECK(cm.k_max(32, 32) == doctest::Approx(-1 / r).epsilon(0.02));
}

TEST_CASE("cylinder curvature at the crest") {
  const double r = 60;
  DepthMap map(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double dx = x - 32;
      map.depth(x, y) = std::sqrt(r * r - dx * dx);
    }
  const auto cm = principal_curvatures(smooth(map));
  CHECK(cm.k_min(32, 30) == doctest::Approx(-1 / r).epsilon(0.02));
  CHECK(std::abs(cm.k_max(32, 30)) < 1e-4);
}

TEST_CASE("shape index special values") {
  CHECK(shape_index(-1, 1) == 0.0);
  CHECK(shape_index(0, 1) == doctest::Approx(-0.5));
  CHECK(shape_index(-1, 0) == doctest::Approx(0.5));
  CHECK(shape_index(2, 2) == -1.0);
  CHECK(shape_index(-2, -2) == 1.0);
  CHECK(shape_index(0, 0) == 0.0);
}

TEST_CASE("shape index is scale invariant and odd") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> sc(0.01, 100);
  for (int n = 0; n < 5000; ++n) {
    double a = g(rng), b = g(rng);
    if (a > b) std::swap(a, b);
    if (a == b) continue;
    const double s = shape_index(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    const double f = sc(rng);
    CHECK(shape_index(a * f, b * f) == doctest::Approx(s).epsilon(1e-12));
    CHECK(shape_index(-b, -a) == doctest::Approx(-s).epsilon(1e-12));
  }
}

TEST_CASE("equal-width quantization changes class exactly at the breakpoints") {
  for (int i = 1; i < 9; ++i) {
    const double b = -1.0 + 2.0 * i / 9.0;
    CHECK(static_cast<int>(quantize_shape_index(std::nextafter(b, -2.0))) == i - 1);
    CHECK(static_cast<int>(quantize_shape_index(std::nextafter(b, 2.0))) == i);
  }
  CHECK(quantize_shape_index(-1.0) == SurfaceClass::Cup);
  CHECK(quantize_shape_index(1.0) == SurfaceClass::Cap);
  CHECK(quantize_shape_index(0.0) == SurfaceClass::Saddle);
  CHECK(quantize_shape_index(std::nan("")) == SurfaceClass::Undefined);
}

TEST_CASE("Koenderink quantization breakpoints") {
  const double breaks[] = {-7.0 / 8, -5.0 / 8, -3.0 / 8, -1.0 / 8, 1.0 / 8, 3.0 / 8, 5.0 / 8, 7.0 / 8};
  for (int i = 0; i < 8; ++i) {
    const auto k = QuantizationScheme::Koenderink;
    CHECK(static_cast<int>(quantize_shape_index(std::nextafter(breaks[i], -2.0), k)) == i);
    CHECK(static_cast<int>(quantize_shape_index(std::nextafter(breaks[i], 2.0), k)) == i + 1);
  }
  CHECK(parse_quantization_scheme("koenderink") == QuantizationScheme::Koenderink);
  CHECK(parse_quantization_scheme("equal_width") == QuantizationScheme::EqualWidth);
  CHECK_THROWS_AS(parse_quantization_scheme("bogus"), Error);
}

TEST_CASE("class names run from cup to cap") {
  CHECK(to_string(SurfaceClass::Cup) == "cup");
  CHECK(to_string(SurfaceClass::Saddle) == "saddle");
  CHECK(to_string(SurfaceClass::Cap) == "cap");
}

TEST_CASE("flat pixels are undefined and invalid pixels stay undefined") {
  CurvatureMap cm{Grid<double>(3, 1), Grid<double>(3, 1), Grid<double>(3, 1, 1.0), Grid<double>(3, 1), Mask(3, 1, 1)};
  cm.k_min(1, 0) = -0.5;
  cm.k_max(1, 0) = -0.5;
  cm.k_min(2, 0) = -0.5;
  cm.k_max(2, 0) = 0.1;
  cm.valid(2, 0) = 0;
  const auto m = shape_index(cm);
  CHECK(m.cls(0, 0) == SurfaceClass::Undefined);
  CHECK(m.cls(1, 0) == SurfaceClass::Cap);
  CHECK(m.s(1, 0) == 1.0);
  CHECK(m.cls(2, 0) == SurfaceClass::Undefined);
}

TEST_CASE("majority filter fixed points and outliers") {
  ShapeIndexMap m{Grid<double>(5, 5), Grid<SurfaceClass>(5, 5, SurfaceClass::Ridge), Mask(5, 5, 1)};
  CHECK(majority_rank_filter(m, 3).cls == m.cls);
  m.cls(2, 2) = SurfaceClass::Cup;
  const auto f = majority_rank_filter(m, 3);
  CHECK(f.cls(2, 2) == SurfaceClass::Ridge);
  CHECK(majority_rank_filter(f, 3).cls == f.cls);
  CHECK_THROWS_AS(majority_rank_filter(m, 4), Error);
  CHECK_THROWS_AS(majority_rank_filter(m, 1), Error);
}

TEST_CASE("majority filter matches a brute-force window mode") {
  std::mt19937_64 rng(13);
  for (int window : {3, 5}) {
    auto m = class_map(23, 17, rng);
    for (int i = 0; i < 30; ++i) m.valid(static_cast<int>(rng() % 23), static_cast<int>(rng() % 17)) = 0;
    const auto f = majority_rank_filter(m, window);
    const int r = window / 2;
    for (int y = 0; y < 17; ++y)
      for (int x = 0; x < 23; ++x) {
        if (!m.valid(x, y)) {
          CHECK(f.cls(x, y) == m.cls(x, y));
          continue;
        }
        int votes[kSurfaceClassCount] = {};
        for (int v = y - r; v <= y + r; ++v)
          for (int u = x - r; u <= x + r; ++u) {
            if (u < 0 || v < 0 || u >= 23 || v >= 17 || !m.valid(u, v)) continue;
            if (m.cls(u, v) != SurfaceClass::Undefined) ++votes[static_cast<int>(m.cls(u, v))];
          }
        int best = -1;
        for (int c = 0; c < kSurfaceClassCount; ++c)
          if (votes[c] > 0 && (best < 0 || votes[c] > votes[best])) best = c;
        const auto expect = best < 0 ? m.cls(x, y) : static_cast<SurfaceClass>(best);
        CHECK(f.cls(x, y) == expect);
      }
    CHECK(f.s == m.s);
  }
}
