#include "clothkit/topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit {

BinaryMap detect_ridges(const CurvatureMap& curvature, const ShapeIndexMap& shape,
                        std::span<const double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorKind::Config, "ridge threshold list is empty");
  if (shape.width() != curvature.width() || shape.height() != curvature.height()) {
    throw Error(ErrorKind::Consistency, "curvature and shape index maps differ in size");
  }
  const double lowest = *std::min_element(thresholds.begin(), thresholds.end());
  BinaryMap out(curvature.width(), curvature.height());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!curvature.valid(x, y)) continue;
      const auto c = shape.cls(x, y);
      const bool ridge_like = c == SurfaceClass::SaddleRidge || c == SurfaceClass::Ridge ||
                              c == SurfaceClass::Dome || c == SurfaceClass::Cap;
      if (ridge_like && curvature.dominant(x, y) > lowest) out(x, y) = 1;
    }
  }
  return out;
}

BinaryMap detect_contours(const SmoothedSurface& surface, const CurvatureMap& curvature,
                          const ContourOptions& options) {
  if (!(options.pitch > 0)) throw Error(ErrorKind::Config, "pixel pitch must be > 0");
  const int w = curvature.width();
  const int h = curvature.height();
  if (surface.width() != w || surface.height() != h) {
    throw Error(ErrorKind::Consistency, "surface and curvature maps differ in size");
  }
  const double scale = 1.0 / (options.pitch * options.pitch);
  const auto second = [&](int x, int y, double dx, double dy) {
    return scale * (surface.zxx(x, y) * dx * dx + 2 * surface.zxy(x, y) * dx * dy +
                    surface.zyy(x, y) * dy * dy);
  };

  BinaryMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!curvature.valid(x, y)) continue;
      const double dx = curvature.dir_x(x, y);
      const double dy = curvature.dir_y(x, y);
      const double a = second(x, y, dx, dy);
      constexpr std::array<std::array<int, 2>, 2> kSteps{{{1, 0}, {0, 1}}};
      for (const auto& step : kSteps) {
        const int qx = x + step[0];
        const int qy = y + step[1];
        if (qx >= w || qy >= h || !curvature.valid(qx, qy)) continue;
        // Both values along p's direction, so the pair is comparable.
        const double b = second(qx, qy, dx, dy);
        if (!((a < 0 && b > 0) || (a > 0 && b < 0))) continue;
        if (std::abs(a - b) <= options.min_jump) continue;
        if (std::abs(a) <= std::abs(b)) {
          out(x, y) = 1;
        } else {
          out(qx, qy) = 1;
        }
      }
    }
  }
  return out;
}

namespace {

// Neighbours counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
constexpr std::array<int, 8> kNx{1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kNy{0, -1, -1, -1, 0, 1, 1, 1};

struct Padded {
  int w, h;
  std::vector<std::uint8_t> v;

  explicit Padded(const BinaryMap& m) : w(m.width() + 2), h(m.height() + 2), v(static_cast<std::size_t>(w * h)) {
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) v[idx(x + 1, y + 1)] = m(x, y) ? 1 : 0;
    }
  }
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y * w + x); }
  std::array<int, 8> ring(int x, int y) const {
    std::array<int, 8> n{};
    for (int k = 0; k < 8; ++k) n[static_cast<std::size_t>(k)] = v[idx(x + kNx[static_cast<std::size_t>(k)], y + kNy[static_cast<std::size_t>(k)])];
    return n;
  }
};

int neighbour_count(const std::array<int, 8>& n) {
  int b = 0;
  for (const int v : n) b += v;
  return b;
}

/// Yokoi connectivity number for 8-connected foreground.
int connectivity8(const std::array<int, 8>& n) {
  int c = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - n[static_cast<std::size_t>(k)];
    const int b = 1 - n[static_cast<std::size_t>((k + 1) % 8)];
    const int d = 1 - n[static_cast<std::size_t>((k + 2) % 8)];
    c += a - a * b * d;
  }
  return c;
}

bool deletable(const std::array<int, 8>& n) { return neighbour_count(n) >= 2 && connectivity8(n) == 1; }

/// Zhang-Suen candidate test. In the classic P2..P9 naming (P2 = north,
/// clockwise) P2=N, P3=NE, P4=E, P5=SE, P6=S, P7=SW, P8=W, P9=NW.
bool zhang_suen_candidate(const std::array<int, 8>& n, int pass) {
  const int p2 = n[2], p3 = n[1], p4 = n[0], p5 = n[7], p6 = n[6], p7 = n[5], p8 = n[4], p9 = n[3];
  const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
  if (b < 2 || b > 6) return false;
  const std::array<int, 9> seq{p2, p3, p4, p5, p6, p7, p8, p9, p2};
  int transitions = 0;
  for (std::size_t i = 0; i < 8; ++i) transitions += seq[i] == 0 && seq[i + 1] == 1;
  if (transitions != 1) return false;
  if (pass == 0) return p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0;
  return p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0;
}

bool in_solid_block(const Padded& img, int x, int y) {
  for (int oy = -1; oy <= 0; ++oy) {
    for (int ox = -1; ox <= 0; ++ox) {
      if (img.v[img.idx(x + ox, y + oy)] && img.v[img.idx(x + ox + 1, y + oy)] &&
          img.v[img.idx(x + ox, y + oy + 1)] && img.v[img.idx(x + ox + 1, y + oy + 1)]) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

BinaryMap thin(const BinaryMap& map) {
  Padded img(map);
  const int w = map.width();
  const int h = map.height();
  std::vector<Pixel> candidates;

  for (bool changed = true; changed;) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      candidates.clear();
      for (int y = 1; y <= h; ++y) {
        for (int x = 1; x <= w; ++x) {
          if (img.v[img.idx(x, y)] && zhang_suen_candidate(img.ring(x, y), pass)) candidates.push_back({x, y});
        }
      }
      // Sequential re-check keeps two-pixel-thick diagonals from vanishing.
      for (const auto& p : candidates) {
        if (deletable(img.ring(p.x, p.y))) {
          img.v[img.idx(p.x, p.y)] = 0;
          changed = true;
        }
      }
    }
    for (int y = 1; y <= h; ++y) {
      for (int x = 1; x <= w; ++x) {
        if (img.v[img.idx(x, y)] && in_solid_block(img, x, y) && deletable(img.ring(x, y))) {
          img.v[img.idx(x, y)] = 0;
          changed = true;
        }
      }
    }
  }

  BinaryMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(x, y) = img.v[img.idx(x + 1, y + 1)];
  }
  return out;
}

TopologyMap TopologyMap::from_maps(const BinaryMap& ridges, const BinaryMap& contours, Grid<double> depth) {
  if (ridges.width() != contours.width() || ridges.height() != contours.height() ||
      depth.width() != ridges.width() || depth.height() != ridges.height()) {
    throw Error(ErrorKind::Consistency, "topology maps differ in size");
  }
  TopologyMap t;
  t.width = ridges.width();
  t.height = ridges.height();
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      if (ridges(x, y)) t.ridges.push_back({x, y});
      if (contours(x, y)) t.contours.push_back({x, y});
    }
  }
  t.depth = std::move(depth);
  return t;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1-D lower envelope of parabolas (Felzenszwalb-Huttenlocher).
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n + 1), 0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    for (;;) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      // Only possible with k == 0: the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k + 1)] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(j + 1)] < q) ++j;
    const int p = v[static_cast<std::size_t>(j)];
    d[q] = double(q - p) * (q - p) + f[p];
  }
}

}  // namespace

Grid<double> squared_distance_transform(const BinaryMap& features) {
  const int w = features.width();
  const int h = features.height();
  Grid<double> out(w, h, kInf);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (features(x, y)) out(x, y) = 0;
    }
  }
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(static_cast<std::size_t>(std::max(w, h)));
  std::vector<double> d(f.size());
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = out(x, y);
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) out(x, y) = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = out(x, y);
    edt_1d(f.data(), d.data(), w, v, z);
    for (int x = 0; x < w; ++x) out(x, y) = d[static_cast<std::size_t>(x)];
  }
  return out;
}

std::vector<TsdSample> tsd_distances(const TopologyMap& topology) {
  if (topology.contours.empty()) {
    if (!topology.ridges.empty()) diagnose("no wrinkle contours found; TSD samples are empty");
    return {};
  }
  BinaryMap contour(topology.width, topology.height);
  for (const auto& p : topology.contours) contour.at(p.x, p.y) = 1;
  const auto dist = squared_distance_transform(contour);

  std::vector<TsdSample> out;
  out.reserve(topology.ridges.size());
  for (const auto& r : topology.ridges) {
    const auto d2 = static_cast<long long>(dist.at(r.x, r.y));
    const int reach = static_cast<int>(std::floor(std::sqrt(static_cast<double>(d2)) + 1e-9));
    bool found = false;
    Pixel best;
    // Scan lattice points at exactly this distance in row-major order.
    for (int dy = -reach; dy <= reach && !found; ++dy) {
      const long long rem = d2 - static_cast<long long>(dy) * dy;
      if (rem < 0) continue;
      const auto dx = static_cast<int>(std::llround(std::sqrt(static_cast<double>(rem))));
      if (static_cast<long long>(dx) * dx != rem) continue;
      for (const int sx : {-dx, dx}) {
        const int cx = r.x + sx;
        const int cy = r.y + dy;
        if (contour.contains(cx, cy) && contour(cx, cy)) {
          best = {cx, cy};
          found = true;
          break;
        }
      }
    }
    if (!found) throw Error(ErrorKind::Numeric, "distance transform inconsistent with contour set");
    out.push_back({std::sqrt(static_cast<double>(d2)),
                   topology.depth.at(r.x, r.y) - topology.depth.at(best.x, best.y), r, best});
  }
  return out;
}

void save_topology_overlay(const std::filesystem::path& path, const TopologyMap& topology) {
  std::vector<unsigned char> pixels(static_cast<std::size_t>(topology.width * topology.height), 0);
  for (const auto& p : topology.contours) pixels[static_cast<std::size_t>(p.y * topology.width + p.x)] = 128;
  for (const auto& p : topology.ridges) pixels[static_cast<std::size_t>(p.y * topology.width + p.x)] = 255;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "P5\n" << topology.width << ' ' << topology.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace clothkit
