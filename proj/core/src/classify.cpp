#include "clothkit/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <string>
#include <unordered_map>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/parallel.hpp"

namespace clothkit {

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const noexcept {
  if (type == KernelType::Linear) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::exp(-gamma * s);
}

double BinarySvm::decision(std::span<const double> x, const Kernel& kernel) const {
  if (support.rows > 0 && x.size() != support.cols) {
    throw Error(ErrorKind::Dimension, "input has " + std::to_string(x.size()) + " features, model expects " +
                                          std::to_string(support.cols));
  }
  double f = bias;
  for (std::size_t i = 0; i < support.rows; ++i) f += coef[i] * kernel(support.row(i), x);
  return f;
}

namespace {

/// Kernel rows K(x_i, .) over the training set: a full Gram matrix when it
/// fits, otherwise an LRU cache of rows.
class KernelRows {
 public:
  KernelRows(const Matrix& x, const Kernel& kernel, const SmoOptions& options, const std::vector<double>* gram)
      : x_(x), kernel_(kernel), n_(x.rows), gram_(gram), capacity_(std::max<std::size_t>(2, options.cache_rows)) {
    if (!gram_ && n_ <= options.full_gram_limit) {
      own_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i; j < n_; ++j) {
          const double v = kernel_(x_.row(i), x_.row(j));
          own_[i * n_ + j] = v;
          own_[j * n_ + i] = v;
        }
      }
      gram_ = &own_;
    }
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = gram_ ? (*gram_)[i * n_ + i] : kernel_(x_.row(i), x_.row(i));
  }

  double diag(std::size_t i) const { return diag_[i]; }

  const double* row(std::size_t i) {
    if (gram_) return gram_->data() + i * n_;
    const auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second.data();
    }
    std::vector<double> r;
    if (lru_.size() >= capacity_) {
      r = std::move(lru_.back().second);
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    r.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) r[j] = kernel_(x_.row(i), x_.row(j));
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second.data();
  }

 private:
  const Matrix& x_;
  Kernel kernel_;
  std::size_t n_;
  const std::vector<double>* gram_;
  std::vector<double> own_;
  std::vector<double> diag_;
  std::size_t capacity_;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, std::list<std::pair<std::size_t, std::vector<double>>>::iterator> index_;
};

SmoResult smo(const Matrix& x, std::span<const int> y, const Kernel& kernel, const SmoOptions& options,
              const std::vector<double>* gram) {
  const std::size_t n = x.rows;
  if (y.size() != n) throw Error(ErrorKind::Dimension, "label count does not match sample count");
  if (!(options.c > 0)) throw Error(ErrorKind::Config, "SVM C must be > 0");
  bool pos = false, neg = false;
  for (const int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw Error(ErrorKind::Domain, "binary SVM labels must be +1 or -1");
  }
  if (!pos || !neg) throw Error(ErrorKind::Config, "binary SVM training needs both classes");

  KernelRows rows(x, kernel, options, gram);
  const double c = options.c;
  constexpr double kTau = 1e-12;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a

  const auto up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0); };
  const auto low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < c); };

  SmoResult result;
  long it = 0;
  double gap = 0;
  for (;; ++it) {
    std::size_t i = n, j = n;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    gap = g_max - g_min;
    if (i == n || j == n || gap < options.tolerance) {
      result.converged = true;
      break;
    }
    if (it >= options.max_iterations) {
      diagnose("SMO stopped at the iteration limit with KKT gap " + std::to_string(gap));
      break;
    }

    const double* ki = rows.row(i);
    const double* kj = rows.row(j);
    const double yi = y[i], yj = y[j];
    const double qij = yi * yj * ki[j];
    const double ai_old = alpha[i], aj_old = alpha[j];
    if (y[i] != y[j]) {
      double quad = rows.diag(i) + rows.diag(j) + 2 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
      } else if (alpha[j] > c) {
        alpha[j] = c, alpha[i] = c + diff;
      }
    } else {
      double quad = rows.diag(i) + rows.diag(j) - 2 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
        if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - ai_old;
    const double dj = alpha[j] - aj_old;
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);

    if (options.record_objective) {
      double f = 0;
      for (std::size_t t = 0; t < n; ++t) f += alpha[t] * (grad[t] - 1.0);
      result.objective.push_back(-0.5 * f);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double sum_free = 0;
  std::size_t n_free = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  result.model.bias = -rho;
  result.model.support = Matrix(0, x.cols);
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0) continue;
    result.model.support.append_row(x.row(t));
    result.model.coef.push_back(alpha[t] * y[t]);
  }
  result.alpha = std::move(alpha);
  result.kkt_gap = gap;
  result.iterations = it;
  return result;
}

}  // namespace

SmoResult svm_train_binary(const Matrix& x, std::span<const int> y, const Kernel& kernel, const SmoOptions& options) {
  return smo(x, y, kernel, options, nullptr);
}

double svm_dual_objective(const Matrix& x, std::span<const int> y, std::span<const double> alpha,
                          const Kernel& kernel) {
  double lin = 0, quad = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    lin += alpha[i];
    if (alpha[i] == 0) continue;
    for (std::size_t j = 0; j < x.rows; ++j) {
      if (alpha[j] == 0) continue;
      quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(x.row(i), x.row(j));
    }
  }
  return lin - 0.5 * quad;
}

SvmModel train_one_vs_all(const Matrix& x, std::span<const int> labels, std::vector<std::string> classes,
                          const Kernel& kernel, const SmoOptions& options) {
  const std::size_t n = x.rows;
  const int l = static_cast<int>(classes.size());
  if (l < 2) throw Error(ErrorKind::Config, "one-vs-all training needs at least two classes");
  if (labels.size() != n) throw Error(ErrorKind::Dimension, "label count does not match sample count");
  std::vector<std::size_t> seen(classes.size(), 0);
  for (const int v : labels) {
    if (v < 0 || v >= l) throw Error(ErrorKind::Domain, "label index out of range");
    ++seen[static_cast<std::size_t>(v)];
  }
  for (int c = 0; c < l; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw Error(ErrorKind::Config, "class '" + classes[static_cast<std::size_t>(c)] + "' has no training samples");
    }
  }

  // One Gram matrix shared by every binary problem.
  std::vector<double> gram;
  if (n <= options.full_gram_limit) {
    gram.resize(n * n);
    parallel_for(n, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) gram[i * n + j] = kernel(x.row(i), x.row(j));
    });
  }

  SvmModel model;
  model.kernel = kernel;
  model.c = options.c;
  model.dimension = x.cols;
  model.classes = std::move(classes);
  model.per_class.resize(static_cast<std::size_t>(l));
  parallel_for(static_cast<std::size_t>(l), [&](std::size_t c) {
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<int>(c) ? 1 : -1;
    model.per_class[c] = smo(x, y, kernel, options, gram.empty() ? nullptr : &gram).model;
  });
  return model;
}

Prediction predict(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.dimension) {
    throw Error(ErrorKind::Dimension, "input has " + std::to_string(x.size()) + " features, model expects " +
                                          std::to_string(model.dimension));
  }
  Prediction p;
  p.decision.reserve(model.per_class.size());
  for (const auto& m : model.per_class) p.decision.push_back(m.decision(x, model.kernel));
  p.label = static_cast<int>(std::max_element(p.decision.begin(), p.decision.end()) - p.decision.begin());
  return p;
}

}  // namespace clothkit
