#include "clothkit/coding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"
#include "clothkit/rng.hpp"

namespace clothkit {

std::uint64_t Codebook::total_count() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double Codebook::mean_count() const {
  return size > 0 ? static_cast<double>(total_count()) / size : 0.0;
}

void Codebook::refresh_weights() { weights = atom_weights(counts, sigma_w, mean_count()); }

void Codebook::check() const {
  if (size < 2) throw Error(ErrorKind::Consistency, "codebook needs at least two atoms");
  if (dimension < 1) throw Error(ErrorKind::Consistency, "codebook dimension must be positive");
  if (atoms.rows != static_cast<std::size_t>(size) || atoms.cols != static_cast<std::size_t>(dimension)) {
    throw Error(ErrorKind::Dimension, "codebook atom matrix does not match K x D");
  }
  if (counts.size() != static_cast<std::size_t>(size) || weights.size() != counts.size()) {
    throw Error(ErrorKind::Dimension, "codebook counts/weights do not match K");
  }
  for (const double v : atoms.data) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "codebook atom is not finite");
  }
}

std::vector<double> atom_weights(std::span<const std::uint64_t> counts, double sigma, double mean_count) {
  std::vector<double> w(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    w[j] = 1.0 / (1.0 + std::exp(-sigma * (static_cast<double>(counts[j]) - mean_count)));
  }
  return w;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Nearest atom per sample via ||x||^2 - 2 x.c + ||c||^2 in row blocks.
void assign_nearest(const Matrix& samples, const Matrix& centres, std::vector<int>& label) {
  const auto n = static_cast<Eigen::Index>(samples.rows);
  const auto k = static_cast<Eigen::Index>(centres.rows);
  const auto d = static_cast<Eigen::Index>(samples.cols);
  const Eigen::Map<const RowMatrix> x(samples.data.data(), n, d);
  const Eigen::Map<const RowMatrix> c(centres.data.data(), k, d);
  const Eigen::VectorXd c_norm = c.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 2048;
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index start = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index rows = std::min(kBlock, n - start);
    const RowMatrix dots = x.middleRows(start, rows) * c.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      int best = 0;
      double best_v = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < k; ++j) {
        const double v = c_norm(j) - 2.0 * dots(i, j);
        if (v < best_v) {
          best_v = v;
          best = static_cast<int>(j);
        }
      }
      label[static_cast<std::size_t>(start + i)] = best;
    }
  });
}

Matrix plus_plus_seeds(const Matrix& samples, int k, Rng& rng) {
  const std::size_t n = samples.rows;
  Matrix centres(0, samples.cols);
  centres.append_row(samples.row(rng.index(n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(samples.row(i), centres.row(0));
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0) {
      const double target = rng.uniform() * total;
      double acc = 0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centres.append_row(samples.row(pick));
    const auto centre = centres.row(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(samples.row(i), centre));
  }
  return centres;
}

}  // namespace

Codebook kmeans(const Matrix& samples, const KMeansOptions& options, KMeansTrace* trace) {
  const int k = options.clusters;
  if (k < 2) throw Error(ErrorKind::Config, "codebook size must be >= 2");
  if (options.max_iterations < 1) throw Error(ErrorKind::Config, "kmeans needs at least one iteration");
  if (samples.rows < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::Config, "kmeans needs at least K=" + std::to_string(k) + " samples, got " +
                                       std::to_string(samples.rows));
  }
  if (samples.cols == 0) throw Error(ErrorKind::Dimension, "kmeans samples have zero dimension");

  const std::size_t n = samples.rows;
  const std::size_t d = samples.cols;
  Rng rng(options.seed);
  Matrix centres = plus_plus_seeds(samples, k, rng);

  std::vector<int> label(n, -1);
  std::vector<int> previous;
  const auto objective = [&] {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += squared_distance(samples.row(i), centres.row(static_cast<std::size_t>(label[i])));
    }
    return s;
  };

  KMeansTrace local;
  assign_nearest(samples, centres, label);
  local.objective.push_back(objective());

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(k));
  for (int it = 1; it <= options.max_iterations; ++it) {
    // Update step.
    std::fill(centres.data.begin(), centres.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = centres.row(static_cast<std::size_t>(label[i]));
      const auto x = samples.row(i);
      for (std::size_t j = 0; j < d; ++j) c[j] += x[j];
      ++counts[static_cast<std::size_t>(label[i])];
    }
    std::vector<double> far;
    for (int c = 0; c < k; ++c) {
      auto row = centres.row(static_cast<std::size_t>(c));
      if (counts[static_cast<std::size_t>(c)] > 0) {
        for (double& v : row) v /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: take the sample farthest from its own centre.
      if (far.empty()) {
        far.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          far[i] = squared_distance(samples.row(i), centres.row(static_cast<std::size_t>(label[i])));
        }
      }
      const auto pick = static_cast<std::size_t>(std::max_element(far.begin(), far.end()) - far.begin());
      std::copy_n(samples.row(pick).begin(), d, row.begin());
      far[pick] = -1;
    }

    previous = label;
    assign_nearest(samples, centres, label);
    local.objective.push_back(objective());
    local.iterations = it;
    if (label == previous) {
      local.converged = true;
      break;
    }
  }

  Codebook cb;
  cb.size = k;
  cb.dimension = static_cast<int>(d);
  cb.atoms = std::move(centres);
  cb.counts.assign(static_cast<std::size_t>(k), 0);
  for (const int l : label) ++cb.counts[static_cast<std::size_t>(l)];
  cb.sigma_w = options.sigma_w;
  cb.refresh_weights();
  if (trace) *trace = std::move(local);
  return cb;
}

double quantization_error(const Matrix& samples, const Codebook& codebook) {
  if (samples.cols != static_cast<std::size_t>(codebook.dimension)) {
    throw Error(ErrorKind::Dimension, "sample dimension does not match codebook");
  }
  double total = 0;
  for (std::size_t i = 0; i < samples.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < codebook.size; ++j) best = std::min(best, squared_distance(samples.row(i), codebook.atom(j)));
    total += best;
  }
  return total;
}

LlcCode llc_encode(std::span<const double> x, const Codebook& codebook, int k, double lambda) {
  const int kk = codebook.size;
  if (x.size() != static_cast<std::size_t>(codebook.dimension)) {
    throw Error(ErrorKind::Dimension, "descriptor has " + std::to_string(x.size()) + " values, codebook expects " +
                                          std::to_string(codebook.dimension));
  }
  if (k < 1 || k > kk) throw Error(ErrorKind::Config, "llc_k must lie in [1, K]");
  if (lambda < 0) throw Error(ErrorKind::Config, "llc_lambda must be >= 0");

  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(kk));
  for (int j = 0; j < kk; ++j) dist[static_cast<std::size_t>(j)] = {squared_distance(x, codebook.atom(j)), j};
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  const auto d = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd z(k, d);
  Eigen::VectorXd penalty(k);
  for (int a = 0; a < k; ++a) {
    const int j = dist[static_cast<std::size_t>(a)].second;
    const auto atom = codebook.atom(j);
    for (Eigen::Index t = 0; t < d; ++t) z(a, t) = atom[static_cast<std::size_t>(t)] - x[static_cast<std::size_t>(t)];
    const double dw = std::sqrt(dist[static_cast<std::size_t>(a)].first) * codebook.weights[static_cast<std::size_t>(j)];
    penalty(a) = dw * dw;
  }
  Eigen::MatrixXd q = z * z.transpose();
  q.diagonal() += lambda * penalty;

  const auto solve = [&](const Eigen::MatrixXd& qm, Eigen::VectorXd& c) {
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = qm;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return false;
    c = lu.solve(rhs).head(k);
    return c.allFinite();
  };

  Eigen::VectorXd c;
  if (!solve(q, c)) {
    const double tr = q.trace();
    q.diagonal().array() += 1e-8 * (tr > 0 ? tr : 1.0);
    if (!solve(q, c)) throw Error(ErrorKind::Numeric, "LLC system is singular after regularization");
  }
  c /= c.sum();

  LlcCode code;
  code.size = kk;
  code.indices.resize(static_cast<std::size_t>(k));
  code.coefficients.resize(static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a) {
    code.indices[static_cast<std::size_t>(a)] = dist[static_cast<std::size_t>(a)].second;
    code.coefficients[static_cast<std::size_t>(a)] = c(a);
  }
  return code;
}

double llc_objective(std::span<const double> x, const Codebook& codebook, const LlcCode& code, double lambda) {
  std::vector<double> recon(x.size(), 0.0);
  double penalty = 0;
  for (std::size_t a = 0; a < code.indices.size(); ++a) {
    const int j = code.indices[a];
    const double c = code.coefficients[a];
    const auto atom = codebook.atom(j);
    for (std::size_t t = 0; t < x.size(); ++t) recon[t] += c * atom[t];
    const double dw = std::sqrt(squared_distance(x, atom)) * codebook.weights[static_cast<std::size_t>(j)] * c;
    penalty += dw * dw;
  }
  return squared_distance(x, recon) + lambda * penalty;
}

std::vector<double> sum_pool(std::span<const LlcCode> codes, int size) {
  std::vector<double> out(static_cast<std::size_t>(size), 0.0);
  for (const auto& code : codes) {
    if (code.size != size) {
      throw Error(ErrorKind::Dimension, "cannot pool codes of size " + std::to_string(code.size) + " into " +
                                            std::to_string(size));
    }
    for (std::size_t a = 0; a < code.indices.size(); ++a) {
      out[static_cast<std::size_t>(code.indices[a])] += code.coefficients[a];
    }
  }
  return out;
}

namespace {
constexpr std::string_view kCodebookMagic = "LLCB1";
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook, std::uint64_t config_hash,
                   std::uint64_t seed) {
  codebook.check();
  detail::BinaryWriter out(path);
  out.bytes(kCodebookMagic);
  out.u64(config_hash);
  out.u64(seed);
  out.u32(static_cast<std::uint32_t>(codebook.size));
  out.u32(static_cast<std::uint32_t>(codebook.dimension));
  out.f64(codebook.sigma_w);
  for (const double v : codebook.atoms.data) out.f64(v);
  for (const auto n : codebook.counts) out.u64(n);
  out.finish();
}

Codebook load_codebook(const std::filesystem::path& path, std::uint64_t* config_hash, std::uint64_t* seed) {
  detail::BinaryReader in(path);
  in.expect_magic(kCodebookMagic);
  const auto hash = in.u64();
  const auto file_seed = in.u64();
  Codebook cb;
  cb.size = static_cast<int>(in.u32());
  cb.dimension = static_cast<int>(in.u32());
  if (cb.size < 2 || cb.dimension < 1 || cb.size > (1 << 20) || cb.dimension > (1 << 16)) {
    throw Error(ErrorKind::Format, path.string() + ": implausible codebook size");
  }
  cb.sigma_w = in.f64();
  cb.atoms = Matrix(static_cast<std::size_t>(cb.size), static_cast<std::size_t>(cb.dimension));
  for (double& v : cb.atoms.data) v = in.f64();
  cb.counts.resize(static_cast<std::size_t>(cb.size));
  for (auto& n : cb.counts) n = in.u64();
  in.expect_end();
  cb.refresh_weights();
  cb.check();
  if (config_hash) *config_hash = hash;
  if (seed) *seed = file_seed;
  return cb;
}

}  // namespace clothkit
