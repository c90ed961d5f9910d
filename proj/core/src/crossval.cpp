#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "clothkit/classify.hpp"
#include "clothkit/error.hpp"
#include "clothkit/rng.hpp"

namespace clothkit {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : classes(std::move(names)), counts(classes.size(), std::vector<long long>(classes.size(), 0)) {}

void ConfusionMatrix::add(int truth, int predicted, long long n) {
  const auto l = static_cast<int>(size());
  if (truth < 0 || truth >= l || predicted < 0 || predicted >= l) {
    throw Error(ErrorKind::Domain, "confusion matrix index out of range");
  }
  if (n < 0) throw Error(ErrorKind::Domain, "confusion counts must be non-negative");
  counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)] += n;
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

ClassAccuracy confusion_accuracy(const ConfusionMatrix& matrix) {
  if (matrix.size() == 0) throw Error(ErrorKind::Domain, "confusion matrix is empty");
  ClassAccuracy acc;
  double macro = 0;
  int defined = 0;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    const auto& row = matrix.counts[i];
    const long long n = std::accumulate(row.begin(), row.end(), 0LL);
    if (n == 0) {
      acc.per_class.push_back(std::nullopt);
      continue;
    }
    const double a = static_cast<double>(row[i]) / static_cast<double>(n);
    acc.per_class.push_back(a);
    macro += a;
    ++defined;
  }
  const long long total = matrix.total();
  acc.overall = total > 0 ? static_cast<double>(matrix.trace()) / static_cast<double>(total) : 0.0;
  acc.macro = defined > 0 ? macro / defined : 0.0;
  return acc;
}

void save_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& matrix,
                        const std::string& comment) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "true\\predicted";
  for (const auto& c : matrix.classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.classes[i];
    for (const auto v : matrix.counts[i]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

ConfusionMatrix load_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const auto fields = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  std::string line;
  do {
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": empty confusion file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (!line.empty() && line[0] == '#');
  auto header = fields(line);
  if (header.size() < 2) throw Error(ErrorKind::Format, path.string() + ": bad confusion header");
  ConfusionMatrix m(std::vector<std::string>(header.begin() + 1, header.end()));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = fields(line);
    if (row >= m.size() || f.size() != m.size() + 1 || f[0] != m.classes[row]) {
      throw Error(ErrorKind::Format, path.string() + ": malformed confusion row " + std::to_string(row + 1));
    }
    for (std::size_t j = 0; j < m.size(); ++j) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(f[j + 1], &used);
        if (used != f[j + 1].size() || v < 0) throw std::invalid_argument("count");
        m.counts[row][j] = v;
      } catch (const std::exception&) {
        throw Error(ErrorKind::Format, path.string() + ": bad count '" + f[j + 1] + "'");
      }
    }
    ++row;
  }
  if (row != m.size()) throw Error(ErrorKind::Format, path.string() + ": confusion matrix is not square");
  return m;
}

std::vector<FoldSplit> grouped_stratified_folds(std::span<const int> labels, std::span<const std::string> items,
                                                std::span<const std::string> class_names, int folds,
                                                std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::Config, "cross-validation needs at least 2 folds");
  if (labels.size() != items.size()) throw Error(ErrorKind::Dimension, "labels and item ids differ in length");
  const auto l = class_names.size();

  std::map<std::string, int> item_label;
  std::vector<std::vector<std::string>> class_items(l);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || static_cast<std::size_t>(c) >= l) throw Error(ErrorKind::Domain, "label index out of range");
    const auto [it, inserted] = item_label.emplace(items[i], c);
    if (inserted) {
      class_items[static_cast<std::size_t>(c)].push_back(items[i]);
    } else if (it->second != c) {
      throw Error(ErrorKind::Consistency, "item '" + items[i] + "' appears under two categories");
    }
  }

  Rng rng(seed);
  std::map<std::string, int> item_fold;
  for (std::size_t c = 0; c < l; ++c) {
    auto& ids = class_items[c];
    if (ids.size() < static_cast<std::size_t>(folds)) {
      throw Error(ErrorKind::Config, "class '" + class_names[c] + "' has " + std::to_string(ids.size()) +
                                         " distinct items, fewer than " + std::to_string(folds) + " folds");
    }
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.index(i + 1)]);
    for (std::size_t i = 0; i < ids.size(); ++i) item_fold[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }

  std::vector<FoldSplit> splits(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int f = item_fold.at(items[i]);
    for (int k = 0; k < folds; ++k) {
      (k == f ? splits[static_cast<std::size_t>(k)].test : splits[static_cast<std::size_t>(k)].train).push_back(i);
    }
  }
  return splits;
}

CvReport crossval(std::span<const int> labels, std::span<const std::string> items,
                  std::vector<std::string> class_names, const CvOptions& options, const FoldRunner& run_fold) {
  if (options.repeats < 1) throw Error(ErrorKind::Config, "cross-validation needs at least one repeat");
  CvReport report;
  report.folds = options.folds;
  report.repeats = options.repeats;
  report.confusion = ConfusionMatrix(class_names);

  for (int r = 0; r < options.repeats; ++r) {
    const auto splits = grouped_stratified_folds(labels, items, class_names, options.folds,
                                                 mix_seed(options.seed, static_cast<std::uint64_t>(r)));
    long long correct = 0, total = 0;
    for (int f = 0; f < options.folds; ++f) {
      const auto& split = splits[static_cast<std::size_t>(f)];
      const auto predicted = run_fold(split, r, f);
      if (predicted.size() != split.test.size()) {
        throw Error(ErrorKind::Dimension, "fold runner returned the wrong number of predictions");
      }
      for (std::size_t t = 0; t < split.test.size(); ++t) {
        const int truth = labels[split.test[t]];
        report.confusion.add(truth, predicted[t]);
        correct += truth == predicted[t];
        ++total;
      }
    }
    report.repeat_accuracy.push_back(total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0);
  }
  report.mean_accuracy = std::accumulate(report.repeat_accuracy.begin(), report.repeat_accuracy.end(), 0.0) /
                         static_cast<double>(report.repeat_accuracy.size());
  return report;
}

}  // namespace clothkit
