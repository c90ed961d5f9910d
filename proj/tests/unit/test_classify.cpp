#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "clothkit/classify.hpp"
#include "clothkit/error.hpp"
#include "helpers.hpp"

using namespace clothkit;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m;
  for (const auto& row : r) m.append_row(std::vector<double>(row));
  return m;
}

// Three well separated gaussian clouds, `per` samples per class.
void clouds(int per, std::mt19937_64& rng, Matrix& x, std::vector<int>& y, double spread = 0.3) {
  std::normal_distribution<double> g(0, spread);
  const double centres[3][2] = {{0, 0}, {4, 0}, {0, 4}};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per; ++i) {
      x.append_row(std::vector<double>{centres[c][0] + g(rng), centres[c][1] + g(rng)});
      y.push_back(c);
    }
}

std::vector<std::string> item_ids(const std::vector<int>& y, int per_item) {
  std::map<int, int> seen;
  std::vector<std::string> out;
  for (const int c : y) out.push_back("c" + std::to_string(c) + "_" + std::to_string(seen[c]++ / per_item));
  return out;
}

const std::vector<std::string> kThree{"a", "b", "c"};

}  // namespace

TEST_CASE("kernels") {
  const std::vector<double> a{1, 2, 3}, b{0, 2, 5};
  CHECK(Kernel{KernelType::Rbf, 0.7}(a, a) == 1.0);
  CHECK(Kernel{KernelType::Rbf, 0.5}(a, b) == doctest::Approx(std::exp(-0.5 * 5)));
  CHECK(Kernel{KernelType::Linear, 1}(a, b) == 19.0);
}

TEST_CASE("two points give the analytic hard-margin solution") {
  const auto x = rows({{1.0}, {-1.0}});
  const std::vector<int> y{1, -1};
  const auto r = svm_train_binary(x, y, Kernel{KernelType::Linear, 1});
  CHECK(r.converged);
  CHECK(r.alpha[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.alpha[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.model.bias == doctest::Approx(0.0).scale(1));
  CHECK(r.model.decision(std::vector<double>{1.0}, Kernel{KernelType::Linear, 1}) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(svm_dual_objective(x, y, r.alpha, Kernel{KernelType::Linear, 1}) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("a small C caps the multipliers") {
  const auto x = rows({{0.1}, {-0.1}});
  const std::vector<int> y{1, -1};
  SmoOptions o;
  o.c = 2.0;
  const auto r = svm_train_binary(x, y, Kernel{KernelType::Linear, 1}, o);
  CHECK(r.alpha[0] == doctest::Approx(2.0));
  CHECK(r.alpha[1] == doctest::Approx(2.0));
}

TEST_CASE("RBF separates XOR") {
  const auto x = rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> y{1, 1, -1, -1};
  const Kernel k{KernelType::Rbf, 2.0};
  const auto r = svm_train_binary(x, y, k);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.model.decision(x.row(i), k) * y[i] > 0);
}

TEST_CASE("SMO satisfies the KKT conditions and raises the dual objective") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0, 1);
  Matrix x;
  std::vector<int> y;
  for (int i = 0; i < 120; ++i) {
    const double a = g(rng), b = g(rng);
    x.append_row(std::vector<double>{a, b});
    y.push_back(a * a + b > 0.5 + 0.3 * g(rng) ? 1 : -1);
  }
  const Kernel k{KernelType::Rbf, 0.5};
  SmoOptions o;
  o.c = 3.0;
  o.record_objective = true;
  o.tolerance = 1e-4;
  const auto r = svm_train_binary(x, y, k, o);
  CHECK(r.converged);
  double sum = 0;
  for (std::size_t i = 0; i < 120; ++i) {
    const double a = r.alpha[i];
    sum += a * y[i];
    CHECK(a >= 0);
    CHECK(a <= o.c);
    const double m = y[i] * r.model.decision(x.row(i), k);
    if (a < 1e-8) CHECK(m >= 1 - 1e-3);
    else if (a > o.c - 1e-8) CHECK(m <= 1 + 1e-3);
    else CHECK(m == doctest::Approx(1.0).epsilon(1e-3));
  }
  CHECK(sum == doctest::Approx(0.0).scale(1));
  REQUIRE(r.objective.size() > 2);
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] >= r.objective[i - 1] - 1e-9);
  CHECK(r.objective.back() == doctest::Approx(svm_dual_objective(x, y, r.alpha, k)));
}

TEST_CASE("the cached kernel path matches the full Gram matrix") {
  std::mt19937_64 rng(62);
  Matrix x;
  std::vector<int> labels;
  clouds(40, rng, x, labels, 1.5);
  std::vector<int> y;
  for (const int c : labels) y.push_back(c == 0 ? 1 : -1);
  const Kernel k{KernelType::Rbf, 0.3};
  SmoOptions full, cached;
  cached.full_gram_limit = 10;
  cached.cache_rows = 7;
  const auto a = svm_train_binary(x, y, k, full);
  const auto b = svm_train_binary(x, y, k, cached);
  for (std::size_t i = 0; i < a.alpha.size(); ++i) CHECK(a.alpha[i] == doctest::Approx(b.alpha[i]).scale(1));
}

TEST_CASE("duplicate points with opposite labels still converge") {
  const auto x = rows({{1, 1}, {1, 1}, {1, 1}, {0, 0}, {3, 3}});
  const std::vector<int> y{1, -1, 1, -1, 1};
  SmoOptions o;
  o.c = 1.0;
  const auto r = svm_train_binary(x, y, Kernel{KernelType::Rbf, 1.0}, o);
  CHECK(r.converged);
  for (const double a : r.alpha) CHECK((a >= 0 && a <= 1.0));
}

TEST_CASE("binary training argument checks") {
  const auto x = rows({{1}, {2}});
  CHECK_THROWS_AS(svm_train_binary(x, std::vector<int>{1, 1}, Kernel{}), Error);
  SmoOptions o;
  o.c = 0;
  CHECK_THROWS_AS(svm_train_binary(x, std::vector<int>{1, -1}, Kernel{}, o), Error);
  CHECK_THROWS_AS(svm_train_binary(x, std::vector<int>{1}, Kernel{}), Error);
}

TEST_CASE("one-vs-all separates clouds and checks dimensions") {
  std::mt19937_64 rng(63);
  Matrix x;
  std::vector<int> y;
  clouds(20, rng, x, y);
  const auto model = train_one_vs_all(x, y, kThree, Kernel{KernelType::Rbf, 0.5});
  CHECK(model.dimension == 2);
  CHECK(model.per_class.size() == 3);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(predict(model, x.row(i)).label == y[i]);
  CHECK_THROWS_AS(predict(model, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(train_one_vs_all(x, y, {"a", "b"}, Kernel{}), Error);
  const std::vector<int> two(y.size(), 1);
  CHECK_THROWS_AS(train_one_vs_all(x, two, kThree, Kernel{}), Error);
}

TEST_CASE("prediction ties go to the lowest class") {
  SvmModel m;
  m.kernel = Kernel{KernelType::Linear, 1};
  m.dimension = 1;
  m.classes = kThree;
  for (const double b : {0.2, 0.7, 0.7}) {
    BinarySvm s;
    s.support = rows({{0.0}});
    s.coef = {0.0};
    s.bias = b;
    m.per_class.push_back(s);
  }
  const auto p = predict(m, std::vector<double>{1.0});
  CHECK(p.label == 1);
  CHECK(p.decision == std::vector<double>{0.2, 0.7, 0.7});
}

TEST_CASE("model files round trip") {
  testutil::TempDir dir;
  std::mt19937_64 rng(64);
  Matrix x;
  std::vector<int> y;
  clouds(10, rng, x, y, 1.0);
  auto model = train_one_vs_all(x, y, kThree, Kernel{KernelType::Rbf, 0.8});
  model.feature_set = "lbp+si";
  model.config_hash = 1234567;
  model.seed = 8;
  save_model(dir / "m.svm", model);
  const auto back = load_model(dir / "m.svm");
  CHECK(back.classes == model.classes);
  CHECK(back.feature_set == "lbp+si");
  CHECK(back.config_hash == 1234567);
  CHECK(back.seed == 8);
  CHECK(back.kernel.gamma == model.kernel.gamma);
  CHECK(back.c == model.c);
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(predict(back, x.row(i)).decision == predict(model, x.row(i)).decision);
  testutil::write_bytes(dir / "bad.svm", "SVMM1");
  CHECK_THROWS_AS(load_model(dir / "bad.svm"), Error);
}

TEST_CASE("confusion matrix accuracy") {
  ConfusionMatrix m(kThree);
  m.add(0, 0, 8);
  m.add(0, 1, 2);
  m.add(1, 1, 5);
  const auto a = confusion_accuracy(m);
  CHECK(m.total() == 15);
  CHECK(m.trace() == 13);
  CHECK(a.overall == doctest::Approx(13.0 / 15));
  CHECK(*a.per_class[0] == doctest::Approx(0.8));
  CHECK(*a.per_class[1] == 1.0);
  CHECK_FALSE(a.per_class[2].has_value());
  CHECK(a.macro == doctest::Approx(0.9));
  CHECK_THROWS_AS(m.add(3, 0), Error);
}

TEST_CASE("five-category rates average to 83.2 percent") {
  const std::vector<std::string> names{"shirt", "jeans", "sweater", "towel", "tshirt"};
  const long long diag[] = {892, 700, 808, 870, 888};
  ConfusionMatrix m(names);
  for (int c = 0; c < 5; ++c) {
    m.add(c, c, diag[c]);
    m.add(c, (c + 1) % 5, 1000 - diag[c]);
  }
  const auto a = confusion_accuracy(m);
  CHECK(a.overall == doctest::Approx(0.8316));
  CHECK(a.macro == doctest::Approx(0.8316));
  CHECK(std::round(a.macro * 1000) / 10 == doctest::Approx(83.2));
}

TEST_CASE("confusion CSV round trip with a comment line") {
  testutil::TempDir dir;
  ConfusionMatrix m(kThree);
  m.add(0, 2, 3);
  m.add(2, 2, 11);
  save_confusion_csv(dir / "c.csv", m, "seed=3");
  CHECK(testutil::read_bytes(dir / "c.csv").rfind("# seed=3\n", 0) == 0);
  const auto back = load_confusion_csv(dir / "c.csv");
  CHECK(back.classes == m.classes);
  CHECK(back.counts == m.counts);
  testutil::write_bytes(dir / "bad.csv", "x,a,b\na,1\n");
  CHECK_THROWS_AS(load_confusion_csv(dir / "bad.csv"), Error);
}

TEST_CASE("grouped stratified folds keep items together") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40; ++i) labels.push_back(c);
  const auto items = item_ids(labels, 4);
  const auto folds = grouped_stratified_folds(labels, items, kThree, 5, 77);
  REQUIRE(folds.size() == 5);
  std::vector<int> tested(labels.size(), 0);
  for (const auto& f : folds) {
    std::set<std::string> train_items, test_items;
    for (const auto i : f.train) train_items.insert(items[i]);
    for (const auto i : f.test) {
      test_items.insert(items[i]);
      ++tested[i];
    }
    for (const auto& t : test_items) CHECK(train_items.count(t) == 0);
    CHECK(f.train.size() + f.test.size() == labels.size());
    int per_class[3] = {};
    for (const auto i : f.test) ++per_class[labels[i]];
    for (const int n : per_class) CHECK(n == 8);
  }
  for (const int t : tested) CHECK(t == 1);
  const auto again = grouped_stratified_folds(labels, items, kThree, 5, 77);
  for (std::size_t f = 0; f < 5; ++f) CHECK(again[f].test == folds[f].test);
  const auto other = grouped_stratified_folds(labels, items, kThree, 5, 78);
  bool differs = false;
  for (std::size_t f = 0; f < 5; ++f) differs = differs || other[f].test != folds[f].test;
  CHECK(differs);
}

TEST_CASE("folds need enough items per class") {
  const std::vector<int> labels{0, 0, 0, 1, 1, 1};
  const std::vector<std::string> items{"a", "a", "b", "c", "d", "e"};
  try {
    grouped_stratified_folds(labels, items, std::vector<std::string>{"first", "second"}, 3, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("first") != std::string::npos);
  }
}

TEST_CASE("cross-validation on separable data is perfect") {
  std::mt19937_64 rng(65);
  Matrix x;
  std::vector<int> y;
  clouds(30, rng, x, y);
  const auto items = item_ids(y, 3);
  const auto run = [&](const FoldSplit& split, int, int) {
    Matrix tx;
    std::vector<int> ty;
    for (const auto i : split.train) {
      tx.append_row(x.row(i));
      ty.push_back(y[i]);
    }
    const auto model = train_one_vs_all(tx, ty, kThree, Kernel{KernelType::Rbf, 0.5});
    std::vector<int> out;
    for (const auto i : split.test) out.push_back(predict(model, x.row(i)).label);
    return out;
  };
  const auto r = crossval(y, items, kThree, CvOptions{5, 3, 9}, run);
  CHECK(r.mean_accuracy == 1.0);
  CHECK(r.repeat_accuracy.size() == 3);
  CHECK(r.confusion.total() == 3 * 90);
  const auto again = crossval(y, items, kThree, CvOptions{5, 3, 9}, run);
  CHECK(again.confusion.counts == r.confusion.counts);
}

TEST_CASE("cross-validation on shuffled labels is near chance") {
  std::mt19937_64 rng(66);
  Matrix x;
  std::vector<int> y;
  clouds(60, rng, x, y, 2.0);
  std::shuffle(y.begin(), y.end(), rng);
  const auto items = item_ids(y, 2);
  const auto run = [&](const FoldSplit& split, int, int) {
    Matrix tx;
    std::vector<int> ty;
    for (const auto i : split.train) {
      tx.append_row(x.row(i));
      ty.push_back(y[i]);
    }
    const auto model = train_one_vs_all(tx, ty, kThree, Kernel{KernelType::Rbf, 0.5});
    std::vector<int> out;
    for (const auto i : split.test) out.push_back(predict(model, x.row(i)).label);
    return out;
  };
  const auto r = crossval(y, items, kThree, CvOptions{5, 2, 4}, run);
  CHECK(r.mean_accuracy > 0.2);
  CHECK(r.mean_accuracy < 0.47);
}

TEST_CASE("cross-validation rejects a runner with the wrong output size") {
  const std::vector<int> y{0, 0, 1, 1};
  const std::vector<std::string> items{"a", "b", "c", "d"};
  const auto bad = [](const FoldSplit&, int, int) { return std::vector<int>{}; };
  CHECK_THROWS_AS(crossval(y, items, {"x", "y"}, CvOptions{2, 1, 0}, bad), Error);
  CHECK_THROWS_AS(crossval(y, items, {"x", "y"}, CvOptions{1, 1, 0}, bad), Error);
}
