#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clothkit/grid.hpp"

namespace clothkit {

enum class KernelType : std::uint8_t { Linear, Rbf };

struct Kernel {
  KernelType type = KernelType::Rbf;
  double gamma = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const noexcept;
};

/// One binary decision function f(x) = sum_i coef_i K(sv_i, x) + bias.
struct BinarySvm {
  Matrix support;             // nSV x D
  std::vector<double> coef;   // alpha_i * y_i
  double bias = 0;

  double decision(std::span<const double> x, const Kernel& kernel) const;
};

struct SmoOptions {
  double c = 10.0;
  double tolerance = 1e-3;
  long max_iterations = 10'000'000;
  /// Full Gram matrix up to this many samples, LRU row cache above.
  std::size_t full_gram_limit = 4096;
  std::size_t cache_rows = 1024;
  bool record_objective = false;
};

struct SmoResult {
  BinarySvm model;
  std::vector<double> alpha;       // per training sample
  double kkt_gap = 0;              // max violating pair gap at exit
  long iterations = 0;
  bool converged = false;
  std::vector<double> objective;   // dual objective per iteration, if recorded
};

/// Sequential minimal optimization with maximal-violating-pair working-set
/// selection. Labels are +1 / -1. Throws Config for a single-class input or
/// C <= 0.
SmoResult svm_train_binary(const Matrix& x, std::span<const int> y, const Kernel& kernel,
                           const SmoOptions& options = {});

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double svm_dual_objective(const Matrix& x, std::span<const int> y, std::span<const double> alpha,
                          const Kernel& kernel);

/// One-against-all multi-class model.
struct SvmModel {
  Kernel kernel;
  double c = 10.0;
  std::size_t dimension = 0;
  std::vector<std::string> classes;
  std::vector<BinarySvm> per_class;
  std::string feature_set;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Trains one binary model per class (class vs rest). `labels` index
/// `classes`; every class must occur and at least two classes are needed.
SvmModel train_one_vs_all(const Matrix& x, std::span<const int> labels,
                          std::vector<std::string> classes, const Kernel& kernel,
                          const SmoOptions& options = {});

struct Prediction {
  int label = -1;
  std::vector<double> decision;
};

/// argmax of the per-class decision values; ties go to the lowest class.
Prediction predict(const SvmModel& model, std::span<const double> x);

/// Binary `SVMM1` model file.
void save_model(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Evaluation.

/// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<long long>> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> names);

  std::size_t size() const noexcept { return classes.size(); }
  void add(int truth, int predicted, long long n = 1);
  long long total() const;
  long long trace() const;
};

struct ClassAccuracy {
  std::vector<std::optional<double>> per_class;  // nullopt for empty rows
  double overall = 0;                            // trace / total
  double macro = 0;                              // mean over defined classes
};

ClassAccuracy confusion_accuracy(const ConfusionMatrix& matrix);

/// CSV with a header row and column of class names. A non-empty `comment`
/// is written first as a `# ` line; the loader skips `#` lines.
void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& matrix,
                        const std::string& comment = {});
ConfusionMatrix load_confusion_csv(const std::filesystem::path& path);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Folds for one repeat: within each class the distinct item ids are
/// shuffled and dealt round-robin to folds, so items never straddle a split.
/// Throws Config naming the class when it has fewer items than folds.
std::vector<FoldSplit> grouped_stratified_folds(std::span<const int> labels,
                                                std::span<const std::string> items,
                                                std::span<const std::string> class_names,
                                                int folds, std::uint64_t seed);

struct CvOptions {
  int folds = 5;
  int repeats = 10;
  std::uint64_t seed = 0;
};

struct CvReport {
  int folds = 0;
  int repeats = 0;
  std::vector<double> repeat_accuracy;
  double mean_accuracy = 0;
  ConfusionMatrix confusion;
};

/// Trains on `split.train` and returns predicted labels for `split.test`.
using FoldRunner =
    std::function<std::vector<int>(const FoldSplit& split, int repeat, int fold)>;

/// Repeated grouped stratified k-fold. Each repeat uses the seed
/// mix_seed(seed, repeat) for its fold assignment.
CvReport crossval(std::span<const int> labels, std::span<const std::string> items,
                  std::vector<std::string> class_names, const CvOptions& options,
                  const FoldRunner& run_fold);

}  // namespace clothkit
