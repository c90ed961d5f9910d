#include "clothkit/bspline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <numbers>
#include <string>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit {

KnotVector KnotVector::open_uniform(int order, int controls) {
  if (order < 1) throw Error(ErrorKind::Domain, "B-spline order must be >= 1");
  if (controls < order) {
    throw Error(ErrorKind::Domain, "open uniform knot vector needs controls >= order");
  }
  KnotVector kv;
  kv.order = order;
  const int spans = controls - order + 1;
  kv.knots.reserve(static_cast<std::size_t>(controls + order));
  for (int i = 0; i < order; ++i) kv.knots.push_back(0.0);
  for (int i = 1; i < spans; ++i) kv.knots.push_back(static_cast<double>(i));
  for (int i = 0; i < order; ++i) kv.knots.push_back(static_cast<double>(spans));
  return kv;
}

void KnotVector::check() const {
  if (order < 1) throw Error(ErrorKind::Domain, "B-spline order must be >= 1");
  if (knots.size() < static_cast<std::size_t>(2 * order)) {
    throw Error(ErrorKind::Domain, "knot vector too short for its order");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i] >= knots[i - 1])) throw Error(ErrorKind::Domain, "knots must be non-decreasing");
  }
  if (!(domain_end() > domain_begin())) throw Error(ErrorKind::Domain, "empty knot domain");
}

std::vector<double> KnotVector::greville() const {
  const int n = controls();
  const int p = degree();
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (p == 0) {
      g[static_cast<std::size_t>(i)] = 0.5 * (knots[static_cast<std::size_t>(i)] + knots[static_cast<std::size_t>(i + 1)]);
      continue;
    }
    double s = 0;
    for (int k = 1; k <= p; ++k) s += knots[static_cast<std::size_t>(i + k)];
    g[static_cast<std::size_t>(i)] = s / p;
  }
  return g;
}

namespace {

int find_span(const KnotVector& kv, double t) {
  const int n = kv.controls();
  if (!(t >= kv.domain_begin() && t <= kv.domain_end())) {
    throw Error(ErrorKind::Domain, "parameter " + std::to_string(t) + " outside knot domain [" +
                                       std::to_string(kv.domain_begin()) + ", " +
                                       std::to_string(kv.domain_end()) + "]");
  }
  if (t >= kv.domain_end()) {
    // Right end belongs to the last non-empty span.
    int s = n - 1;
    while (s > kv.order - 1 && kv.knots[static_cast<std::size_t>(s)] == kv.knots[static_cast<std::size_t>(s + 1)]) --s;
    return s;
  }
  const auto first = kv.knots.begin() + (kv.order - 1);
  const auto last = kv.knots.begin() + n + 1;
  return static_cast<int>(std::upper_bound(first, last, t) - kv.knots.begin()) - 1;
}

}  // namespace

int basis_derivatives(const KnotVector& kv, double t, int max_derivative, std::span<double> out) {
  const int p = kv.degree();
  const int order = kv.order;
  if (out.size() < static_cast<std::size_t>((max_derivative + 1) * order)) {
    throw Error(ErrorKind::Dimension, "basis derivative buffer too small");
  }
  const int span = find_span(kv, t);
  const auto& U = kv.knots;

  // Triangular table of basis values and knot differences.
  double ndu[8][8];
  double left[8];
  double right[8];
  if (order > 8) throw Error(ErrorKind::Domain, "B-spline order above 8 is not supported");

  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - U[static_cast<std::size_t>(span + 1 - j)];
    right[j] = U[static_cast<std::size_t>(span + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  std::fill(out.begin(), out.begin() + (max_derivative + 1) * order, 0.0);
  for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(j)] = ndu[j][p];

  const int top = std::min(max_derivative, p);
  double a[2][8];
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= top; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      out[static_cast<std::size_t>(k * order + r)] = d;
      std::swap(s1, s2);
    }
  }

  double factor = p;
  for (int k = 1; k <= top; ++k) {
    for (int j = 0; j <= p; ++j) out[static_cast<std::size_t>(k * order + j)] *= factor;
    factor *= (p - k);
  }
  return span - p;
}

std::vector<double> basis_values(const KnotVector& kv, double t) {
  kv.check();
  std::vector<double> local(static_cast<std::size_t>(kv.order));
  const int first = basis_derivatives(kv, t, 0, local);
  std::vector<double> all(static_cast<std::size_t>(kv.controls()), 0.0);
  for (int j = 0; j < kv.order; ++j) all[static_cast<std::size_t>(first + j)] = local[static_cast<std::size_t>(j)];
  return all;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kDomainSlack = 1e-9;

double axis_scale(const KnotVector& kv, int pixels) {
  return pixels > 1 ? (kv.domain_end() - kv.domain_begin()) / (pixels - 1) : 0.0;
}

}  // namespace

FittedSurface::FittedSurface(KnotVector knots_x, KnotVector knots_y, std::vector<double> controls,
                             PixelRect domain, double residual_rms)
    : knots_x_(std::move(knots_x)), knots_y_(std::move(knots_y)), controls_(std::move(controls)),
      domain_(domain), residual_rms_(residual_rms) {
  knots_x_.check();
  knots_y_.check();
  if (controls_.size() != static_cast<std::size_t>(knots_x_.controls() * knots_y_.controls())) {
    throw Error(ErrorKind::Dimension, "control grid does not match knot vectors");
  }
  if (domain_.width < 2 || domain_.height < 2) {
    throw Error(ErrorKind::Domain, "fitted surface domain must be at least 2x2 pixels");
  }
  scale_x_ = axis_scale(knots_x_, domain_.width);
  scale_y_ = axis_scale(knots_y_, domain_.height);
}

double FittedSurface::to_u(double x) const {
  const double lo = domain_.x - kDomainSlack;
  const double hi = domain_.x + domain_.width - 1 + kDomainSlack;
  if (!(x >= lo && x <= hi)) throw Error(ErrorKind::Domain, "x outside fitted surface domain");
  return std::clamp(knots_x_.domain_begin() + (x - domain_.x) * scale_x_, knots_x_.domain_begin(),
                    knots_x_.domain_end());
}

double FittedSurface::to_v(double y) const {
  const double lo = domain_.y - kDomainSlack;
  const double hi = domain_.y + domain_.height - 1 + kDomainSlack;
  if (!(y >= lo && y <= hi)) throw Error(ErrorKind::Domain, "y outside fitted surface domain");
  return std::clamp(knots_y_.domain_begin() + (y - domain_.y) * scale_y_, knots_y_.domain_begin(),
                    knots_y_.domain_end());
}

double FittedSurface::evaluate(double x, double y, int dx, int dy) const {
  if (dx < 0 || dy < 0 || dx + dy > 2) {
    throw Error(ErrorKind::Domain, "derivative orders must be non-negative with sum <= 2");
  }
  const int ox = knots_x_.order;
  const int oy = knots_y_.order;
  double bx[3 * 8];
  double by[3 * 8];
  const int fx = basis_derivatives(knots_x_, to_u(x), dx, std::span<double>(bx, static_cast<std::size_t>((dx + 1) * ox)));
  const int fy = basis_derivatives(knots_y_, to_v(y), dy, std::span<double>(by, static_cast<std::size_t>((dy + 1) * oy)));
  const int nx = controls_x();
  double sum = 0;
  for (int j = 0; j < oy; ++j) {
    double row = 0;
    for (int i = 0; i < ox; ++i) {
      row += bx[dx * ox + i] * controls_[static_cast<std::size_t>((fy + j) * nx + fx + i)];
    }
    sum += by[dy * oy + j] * row;
  }
  return sum * std::pow(scale_x_, dx) * std::pow(scale_y_, dy);
}

SurfaceJet FittedSurface::jet(double x, double y) const {
  const int ox = knots_x_.order;
  const int oy = knots_y_.order;
  double bx[3 * 8];
  double by[3 * 8];
  const int fx = basis_derivatives(knots_x_, to_u(x), 2, std::span<double>(bx, static_cast<std::size_t>(3 * ox)));
  const int fy = basis_derivatives(knots_y_, to_v(y), 2, std::span<double>(by, static_cast<std::size_t>(3 * oy)));
  const int nx = controls_x();
  // r[d][j]: x-derivative d contracted along row j.
  double r[3][8];
  for (int j = 0; j < oy; ++j) {
    for (int d = 0; d < 3; ++d) {
      double s = 0;
      for (int i = 0; i < ox; ++i) s += bx[d * ox + i] * controls_[static_cast<std::size_t>((fy + j) * nx + fx + i)];
      r[d][j] = s;
    }
  }
  const auto contract = [&](int ddx, int ddy) {
    double s = 0;
    for (int j = 0; j < oy; ++j) s += by[ddy * oy + j] * r[ddx][j];
    return s;
  };
  SurfaceJet jet;
  jet.z = contract(0, 0);
  jet.zx = contract(1, 0) * scale_x_;
  jet.zy = contract(0, 1) * scale_y_;
  jet.zxx = contract(2, 0) * scale_x_ * scale_x_;
  jet.zxy = contract(1, 1) * scale_x_ * scale_y_;
  jet.zyy = contract(0, 2) * scale_y_ * scale_y_;
  return jet;
}

double evaluate(const FittedSurface& surface, double x, double y, int dx, int dy) {
  return surface.evaluate(x, y, dx, dy);
}

// ---------------------------------------------------------------------------

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense collocation matrix: row p holds the basis values at pixel p.
Eigen::MatrixXd collocation(const KnotVector& kv, int pixels) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(pixels, kv.controls());
  const double scale = axis_scale(kv, pixels);
  std::vector<double> local(static_cast<std::size_t>(kv.order));
  for (int p = 0; p < pixels; ++p) {
    const double t = std::min(kv.domain_begin() + p * scale, kv.domain_end());
    const int first = basis_derivatives(kv, t, 0, local);
    for (int j = 0; j < kv.order; ++j) a(p, first + j) = local[static_cast<std::size_t>(j)];
  }
  return a;
}

/// Least-squares projector (A^T A)^-1 A^T from the normal equations.
Eigen::MatrixXd normal_projector(const Eigen::MatrixXd& a, const char* axis) {
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols()) {
    throw Error(ErrorKind::Fit, std::string("rank-deficient B-spline basis along ") + axis + " (" +
                                    std::to_string(a.rows()) + " samples for " +
                                    std::to_string(a.cols()) + " controls)");
  }
  Eigen::MatrixXd g = a.transpose() * a;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-12) {
    diagnose(std::string("ill-conditioned B-spline normal equations along ") + axis +
             "; adding 1e-9 diagonal regularization");
    g.diagonal().array() += 1e-9 * g.trace() / static_cast<double>(g.rows());
    llt.compute(g);
  }
  return llt.solve(a.transpose());
}

/// Second divided differences over Greville abscissae; zero on linear data.
Eigen::MatrixXd greville_second_difference(const KnotVector& kv) {
  const auto g = kv.greville();
  const int n = kv.controls();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(std::max(0, n - 2), n);
  for (int i = 1; i + 1 < n; ++i) {
    const double h0 = g[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(i - 1)];
    const double h1 = g[static_cast<std::size_t>(i + 1)] - g[static_cast<std::size_t>(i)];
    if (h0 <= 0 || h1 <= 0) continue;
    d(i - 1, i - 1) = 1.0 / h0;
    d(i - 1, i) = -1.0 / h0 - 1.0 / h1;
    d(i - 1, i + 1) = 1.0 / h1;
  }
  return d;
}

}  // namespace

struct PatchFitter::Impl {
  int width;
  int height;
  KnotVector kx;
  KnotVector ky;
  Eigen::MatrixXd ax;  // width x nx
  Eigen::MatrixXd ay;  // height x ny
  Eigen::MatrixXd px;  // nx x width
  Eigen::MatrixXd py;  // ny x height
  Eigen::MatrixXd penalty;  // n x n, lazily built

  FittedSurface finish(Eigen::Map<const RowMatrix> samples, const RowMatrix& omega,
                       std::span<const std::uint8_t> valid, PixelRect domain) const {
    const RowMatrix fitted = ay * omega * ax.transpose();
    double sse = 0;
    std::size_t count = 0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!valid.empty() && !valid[static_cast<std::size_t>(y * width + x)]) continue;
        const double r = samples(y, x) - fitted(y, x);
        sse += r * r;
        ++count;
      }
    }
    std::vector<double> controls(omega.data(), omega.data() + omega.size());
    return FittedSurface(kx, ky, std::move(controls), domain,
                         count ? std::sqrt(sse / static_cast<double>(count)) : 0.0);
  }
};

PatchFitter::PatchFitter(int width, int height, KnotVector knots_x, KnotVector knots_y)
    : impl_(std::make_unique<Impl>()) {
  knots_x.check();
  knots_y.check();
  if (width < 2 || height < 2) throw Error(ErrorKind::Fit, "patch must be at least 2x2 pixels");
  impl_->width = width;
  impl_->height = height;
  impl_->kx = std::move(knots_x);
  impl_->ky = std::move(knots_y);
  impl_->ax = collocation(impl_->kx, width);
  impl_->ay = collocation(impl_->ky, height);
  impl_->px = normal_projector(impl_->ax, "x");
  impl_->py = normal_projector(impl_->ay, "y");
}

PatchFitter::~PatchFitter() = default;
PatchFitter::PatchFitter(PatchFitter&&) noexcept = default;
PatchFitter& PatchFitter::operator=(PatchFitter&&) noexcept = default;

int PatchFitter::width() const noexcept { return impl_->width; }
int PatchFitter::height() const noexcept { return impl_->height; }

FittedSurface PatchFitter::fit(std::span<const double> samples, PixelRect domain) const {
  const auto& m = *impl_;
  if (samples.size() != static_cast<std::size_t>(m.width * m.height)) {
    throw Error(ErrorKind::Dimension, "patch sample count does not match fitter size");
  }
  domain.width = m.width;
  domain.height = m.height;
  const Eigen::Map<const RowMatrix> p(samples.data(), m.height, m.width);
  // Phi = Ay (x) Ax, so the normal equations separate per axis.
  const RowMatrix omega = m.py * p * m.px.transpose();
  return m.finish(p, omega, {}, domain);
}

FittedSurface PatchFitter::fit_masked(std::span<const double> samples,
                                      std::span<const std::uint8_t> valid, PixelRect domain,
                                      double smoothness) const {
  auto& m = *impl_;
  if (samples.size() != static_cast<std::size_t>(m.width * m.height) || valid.size() != samples.size()) {
    throw Error(ErrorKind::Dimension, "patch sample count does not match fitter size");
  }
  domain.width = m.width;
  domain.height = m.height;
  const int nx = m.kx.controls();
  const int ny = m.ky.controls();
  const int n = nx * ny;

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  std::vector<int> idx;
  std::vector<double> phi;
  std::size_t used = 0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const auto k = static_cast<std::size_t>(y * m.width + x);
      if (!valid[k]) continue;
      ++used;
      idx.clear();
      phi.clear();
      for (int j = 0; j < ny; ++j) {
        const double vy = m.ay(y, j);
        if (vy == 0.0) continue;
        for (int i = 0; i < nx; ++i) {
          const double vx = m.ax(x, i);
          if (vx == 0.0) continue;
          idx.push_back(j * nx + i);
          phi.push_back(vy * vx);
        }
      }
      for (std::size_t a = 0; a < idx.size(); ++a) {
        rhs(idx[a]) += phi[a] * samples[k];
        for (std::size_t b = 0; b < idx.size(); ++b) normal(idx[a], idx[b]) += phi[a] * phi[b];
      }
    }
  }
  if (used == 0) throw Error(ErrorKind::Fit, "patch has no valid samples");

  if (smoothness > 0) {
    if (m.penalty.size() == 0) {
      const auto dx = greville_second_difference(m.kx);
      const auto dy = greville_second_difference(m.ky);
      const Eigen::MatrixXd rx = dx.transpose() * dx;
      const Eigen::MatrixXd ry = dy.transpose() * dy;
      m.penalty = Eigen::MatrixXd::Zero(n, n);
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          for (int i2 = 0; i2 < nx; ++i2) m.penalty(j * nx + i, j * nx + i2) += rx(i, i2);
          for (int j2 = 0; j2 < ny; ++j2) m.penalty(j * nx + i, j2 * nx + i) += ry(j, j2);
        }
      }
    }
    normal += (smoothness * normal.trace() / n) * m.penalty;
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  Eigen::VectorXd c;
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    const auto d = ldlt.vectorD();
    ok = d.minCoeff() > 1e-13 * d.maxCoeff();
  }
  if (!ok) throw Error(ErrorKind::Fit, "rank-deficient masked patch fit");
  c = ldlt.solve(rhs);
  if (!c.allFinite()) throw Error(ErrorKind::Fit, "masked patch fit produced non-finite controls");

  const Eigen::Map<const RowMatrix> p(samples.data(), m.height, m.width);
  const RowMatrix omega = Eigen::Map<const RowMatrix>(c.data(), ny, nx);
  return m.finish(p, omega, valid, domain);
}

FittedSurface fit_patch(const DepthMap& map, PixelRect rect, const KnotVector& knots_x,
                        const KnotVector& knots_y) {
  if (rect.x < 0 || rect.y < 0 || rect.width <= 0 || rect.height <= 0 ||
      rect.x + rect.width > map.width() || rect.y + rect.height > map.height()) {
    throw Error(ErrorKind::Domain, "patch rectangle outside depth map");
  }
  std::vector<double> samples(static_cast<std::size_t>(rect.width * rect.height));
  for (int y = 0; y < rect.height; ++y) {
    for (int x = 0; x < rect.width; ++x) {
      if (!map.valid(rect.x + x, rect.y + y)) {
        throw Error(ErrorKind::Fit, "patch contains pixels outside the garment mask");
      }
      samples[static_cast<std::size_t>(y * rect.width + x)] = map.depth(rect.x + x, rect.y + y);
    }
  }
  if (samples.size() < static_cast<std::size_t>(knots_x.controls() * knots_y.controls())) {
    throw Error(ErrorKind::Fit, "patch has fewer samples than control points");
  }
  return PatchFitter(rect.width, rect.height, knots_x, knots_y).fit(samples, rect);
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kTileOrder = 4;

int tile_controls(int pixels, double spacing) {
  const int spans = std::max(1, static_cast<int>(std::lround((pixels - 1) / spacing)));
  return spans + kTileOrder - 1;
}

std::vector<int> tile_starts(int extent, int tile, int overlap) {
  if (extent <= tile) return {0};
  const int step = tile - overlap;
  const int count = (extent - overlap + step - 1) / step;
  std::vector<int> starts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    starts[static_cast<std::size_t>(i)] =
        static_cast<int>(std::lround(static_cast<double>(i) * (extent - tile) / (count - 1)));
  }
  return starts;
}

/// Cosine taper rising from 0 at an interior tile border over `overlap` px.
double taper(double distance, int overlap) {
  if (overlap <= 0 || distance >= overlap) return 1.0;
  return 0.5 * (1.0 - std::cos(std::numbers::pi * distance / overlap));
}

}  // namespace

void PiecewiseOptions::check() const {
  if (!(knot_spacing > 0)) throw Error(ErrorKind::Config, "knot_spacing must be > 0");
  if (overlap < 0) throw Error(ErrorKind::Config, "tile overlap must be >= 0");
  if (smoothness < 0) throw Error(ErrorKind::Config, "smoothness must be >= 0");
  if (tile < tile_controls(tile, knot_spacing) || tile < kTileOrder) {
    throw Error(ErrorKind::Config, "tile of " + std::to_string(tile) +
                                       " px is smaller than its control grid support");
  }
  if (2 * overlap > tile) throw Error(ErrorKind::Config, "tile overlap must be at most half the tile");
}

std::size_t SmoothedSurface::tile_at(int x, int y) const {
  if (tiles.empty()) throw Error(ErrorKind::Domain, "smoothed surface has no tiles");
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& r = tiles[i].domain();
    if (!r.contains(x, y)) continue;
    const double cx = r.x + 0.5 * (r.width - 1);
    const double cy = r.y + 0.5 * (r.height - 1);
    const double d = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (!std::isfinite(best_d)) throw Error(ErrorKind::Domain, "pixel not covered by any tile");
  return best;
}

DepthMap SmoothedSurface::as_depth_map() const {
  DepthMap map;
  map.depth = z;
  map.mask = mask;
  return map;
}

SmoothedSurface fit_surface_piecewise(const DepthMap& map, const PiecewiseOptions& options) {
  options.check();
  map.check();
  const int w = map.width();
  const int h = map.height();
  if (std::none_of(map.mask.values().begin(), map.mask.values().end(), [](auto v) { return v != 0; })) {
    throw Error(ErrorKind::Consistency, "depth map has no garment pixels");
  }
  if (w < kTileOrder || h < kTileOrder) throw Error(ErrorKind::Config, "depth map smaller than a tile support");

  const auto xs = tile_starts(w, options.tile, options.overlap);
  const auto ys = tile_starts(h, options.tile, options.overlap);
  const int tw = std::min(options.tile, w);
  const int th = std::min(options.tile, h);

  const KnotVector kx = KnotVector::open_uniform(kTileOrder, std::min(tile_controls(tw, options.knot_spacing), tw));
  const KnotVector ky = KnotVector::open_uniform(kTileOrder, std::min(tile_controls(th, options.knot_spacing), th));
  const PatchFitter fitter(tw, th, kx, ky);

  struct TileJob {
    PixelRect rect;
    std::optional<FittedSurface> fit;
  };
  std::vector<TileJob> jobs;
  for (const int ty : ys) {
    for (const int tx : xs) jobs.push_back({PixelRect{tx, ty, tw, th}, std::nullopt});
  }

  parallel_for(jobs.size(), [&](std::size_t t) {
    auto& job = jobs[t];
    const auto& r = job.rect;
    std::vector<double> samples(static_cast<std::size_t>(tw * th));
    std::vector<std::uint8_t> valid(samples.size());
    std::size_t n_valid = 0;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        const auto k = static_cast<std::size_t>(y * tw + x);
        valid[k] = map.mask(r.x + x, r.y + y) ? 1 : 0;
        samples[k] = valid[k] ? map.depth(r.x + x, r.y + y) : 0.0;
        n_valid += valid[k];
      }
    }
    if (n_valid == 0) return;
    try {
      job.fit = n_valid == samples.size() ? fitter.fit(samples, r)
                                          : fitter.fit_masked(samples, valid, r, options.smoothness);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Fit) throw;
      diagnose("tile at (" + std::to_string(r.x) + "," + std::to_string(r.y) + ") skipped: " + e.what());
    }
  });

  SmoothedSurface out;
  out.z = Grid<double>(w, h);
  out.zx = Grid<double>(w, h);
  out.zy = Grid<double>(w, h);
  out.zxx = Grid<double>(w, h);
  out.zxy = Grid<double>(w, h);
  out.zyy = Grid<double>(w, h);
  out.mask = map.mask;
  Grid<double> weight(w, h);

  for (auto& job : jobs) {
    if (!job.fit) continue;
    const auto& r = job.rect;
    const auto& s = *job.fit;
    const bool has_left = r.x > 0;
    const bool has_right = r.x + r.width < w;
    const bool has_top = r.y > 0;
    const bool has_bottom = r.y + r.height < h;
    for (int y = r.y; y < r.y + r.height; ++y) {
      double wy = 1.0;
      if (has_top) wy *= taper(y - r.y + 0.5, options.overlap);
      if (has_bottom) wy *= taper(r.y + r.height - y - 0.5, options.overlap);
      for (int x = r.x; x < r.x + r.width; ++x) {
        if (!map.mask(x, y)) continue;
        double wx = 1.0;
        if (has_left) wx *= taper(x - r.x + 0.5, options.overlap);
        if (has_right) wx *= taper(r.x + r.width - x - 0.5, options.overlap);
        const double wt = wx * wy;
        const auto j = s.jet(x, y);
        out.z(x, y) += wt * j.z;
        out.zx(x, y) += wt * j.zx;
        out.zy(x, y) += wt * j.zy;
        out.zxx(x, y) += wt * j.zxx;
        out.zxy(x, y) += wt * j.zxy;
        out.zyy(x, y) += wt * j.zyy;
        weight(x, y) += wt;
      }
    }
    out.tiles.push_back(std::move(*job.fit));
  }

  std::size_t uncovered = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double wt = weight(x, y);
      if (map.mask(x, y) && wt > 0) {
        out.z(x, y) /= wt;
        out.zx(x, y) /= wt;
        out.zy(x, y) /= wt;
        out.zxx(x, y) /= wt;
        out.zxy(x, y) /= wt;
        out.zyy(x, y) /= wt;
      } else {
        if (map.mask(x, y)) ++uncovered;
        out.z(x, y) = map.depth(x, y);
      }
    }
  }
  if (uncovered) {
    diagnose(std::to_string(uncovered) + " garment pixels not covered by a fitted tile; raw depth kept");
  }
  return out;
}

}  // namespace clothkit
