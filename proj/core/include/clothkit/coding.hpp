#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "clothkit/grid.hpp"

namespace clothkit {

/// K x D dictionary with cluster-size atom weights.
struct Codebook {
  int size = 0;       // K
  int dimension = 0;  // D
  Matrix atoms;       // K x D
  std::vector<std::uint64_t> counts;
  std::vector<double> weights;
  double sigma_w = 0.005;

  std::span<const double> atom(int j) const { return atoms.row(static_cast<std::size_t>(j)); }
  std::uint64_t total_count() const;
  /// N / K.
  double mean_count() const;

  /// Recomputes `weights` from `counts` and `sigma_w`.
  void refresh_weights();
  void check() const;
};

/// w_j = 1 / (1 + exp(-sigma (n_j - mean))).
std::vector<double> atom_weights(std::span<const std::uint64_t> counts, double sigma,
                                 double mean_count);

struct KMeansOptions {
  int clusters = 256;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  double sigma_w = 0.005;
};

struct KMeansTrace {
  std::vector<double> objective;  // sum of squared distances after each assignment
  int iterations = 0;
  bool converged = false;
};

/// k-means++ seeding then Lloyd iterations until the assignment stops
/// changing or `max_iterations`. A cluster left empty is re-seeded with the
/// sample farthest from its current centre.
Codebook kmeans(const Matrix& samples, const KMeansOptions& options, KMeansTrace* trace = nullptr);

/// Sum of squared distances from each sample to its nearest atom.
double quantization_error(const Matrix& samples, const Codebook& codebook);

/// Sparse code: coefficients on `indices`, summing to one.
struct LlcCode {
  int size = 0;  // K
  std::vector<int> indices;
  std::vector<double> coefficients;
};

/// Atom-weighted locality-constrained linear coding. Selects the k nearest
/// atoms (ties by index) and minimizes
///   ||x - sum_j c_j b_j||^2 + lambda * sum_j (d_j w_j c_j)^2,  sum_j c_j = 1
/// exactly via the KKT system, with d_j = ||x - b_j||. A singular system gets
/// 1e-8 * trace diagonal loading.
LlcCode llc_encode(std::span<const double> x, const Codebook& codebook, int k, double lambda);

/// Value of the coding objective for a code.
double llc_objective(std::span<const double> x, const Codebook& codebook, const LlcCode& code,
                     double lambda);

/// Elementwise sum of dense expansions; throws Dimension on mixed K.
std::vector<double> sum_pool(std::span<const LlcCode> codes, int size);

/// Versioned binary `LLCB1`: K, D, sigma_w, atoms, counts. Weights are
/// recomputed on load.
void save_codebook(const std::filesystem::path& path, const Codebook& codebook,
                   std::uint64_t config_hash = 0, std::uint64_t seed = 0);
Codebook load_codebook(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr,
                       std::uint64_t* seed = nullptr);

}  // namespace clothkit
