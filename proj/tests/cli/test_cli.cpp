#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "clothkit/features.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const testutil::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(CLOTHKIT_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::read_bytes(out);
  r.err = testutil::read_bytes(err);
  return r;
}

// Two easily separated classes of small images.
const char* kSpec =
    "classes=narrow,wide\n"
    "samples_per_item=2\n"
    "width=64\nheight=64\n"
    "wrinkles_min=3\nwrinkles_max=4\n"
    "noise_sigma=0.2\n"
    "narrow.ridge_width_sigma=3\nnarrow.ridge_height=12\n"
    "wide.ridge_width_sigma=9\nwide.ridge_height=30\n";

const char* kFast = "--set codebook_k=16 --set folds=2 --set repeats=1";

fs::path make_dataset(const testutil::TempDir& dir, int per_class, const std::string& name = "data") {
  testutil::write_bytes(dir / "spec.txt", kSpec);
  const auto r = run(dir, "-q synth --spec " + (dir / "spec.txt").string() + " --out " + (dir / name).string() +
                              " -n " + std::to_string(per_class) + " --seed 5");
  REQUIRE(r.code == 0);
  return dir / name;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (const char c : s) n += c == '\n';
  return n;
}

std::string summary_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

}  // namespace

TEST_CASE("synth writes images and a manifest, reproducibly") {
  testutil::TempDir dir;
  const auto a = make_dataset(dir, 4, "a");
  const auto b = make_dataset(dir, 4, "b");
  const auto manifest = testutil::read_bytes(a / "manifest.csv");
  CHECK(count_lines(manifest) == 1 + 8);
  CHECK(fs::exists(a / "narrow_0003.pgm"));
  CHECK(fs::exists(a / "wide_0000_mask.pgm"));
  CHECK(manifest == testutil::read_bytes(b / "manifest.csv"));
  CHECK(testutil::read_bytes(a / "wide_0002.pgm") == testutil::read_bytes(b / "wide_0002.pgm"));

  const auto empty = run(dir, "-q synth --spec " + (dir / "spec.txt").string() + " --out " +
                                  (dir / "none").string() + " -n 0");
  CHECK(empty.code == 0);
  CHECK(count_lines(testutil::read_bytes(dir / "none" / "manifest.csv")) == 1);
}

TEST_CASE("usage errors exit with code 2") {
  testutil::TempDir dir;
  CHECK(run(dir, "").code == 2);
  CHECK(run(dir, "frobnicate").code == 2);
  CHECK(run(dir, "synth --out x").code == 2);
  CHECK(run(dir, "extract --manifest m.csv --out f.bin --config /nonexistent/cfg").code == 2);
  const auto data = make_dataset(dir, 2);
  const auto r = run(dir, "extract --manifest " + (data / "manifest.csv").string() + " --out " +
                              (dir / "f.bin").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("--fit-codebook") != std::string::npos);
  CHECK(run(dir, "extract --manifest " + (data / "manifest.csv").string() + " --out f.bin --set majority_window=4 "
                 "--features ls").code == 2);
  CHECK(run(dir, "-q extract --manifest " + (dir / "missing.csv").string() + " --out f.bin --features ls").code == 3);
}

TEST_CASE("extract writes fused vectors and is idempotent") {
  testutil::TempDir dir;
  const auto data = make_dataset(dir, 4);
  const std::string m = (data / "manifest.csv").string();
  const auto r = run(dir, std::string("-q extract --manifest ") + m + " --out " + (dir / "f.bin").string() +
                              " --fit-codebook --set codebook_k=64 --codebook-out " + (dir / "cb.llcb").string());
  REQUIRE(r.code == 0);
  const auto f = clothkit::load_features(dir / "f.bin");
  CHECK(f.records.size() == 8);
  CHECK(f.dimension == 347);
  for (const auto& rec : f.records) CHECK(rec.values.size() == 347);
  CHECK(f.feature_set == "lbp+si+tsd+bsp");

  REQUIRE(run(dir, std::string("-q extract --manifest ") + m + " --out " + (dir / "g.bin").string() +
                       " --codebook " + (dir / "cb.llcb").string()).code == 0);
  CHECK(testutil::read_bytes(dir / "f.bin") == testutil::read_bytes(dir / "g.bin"));

  REQUIRE(run(dir, std::string("-q extract --manifest ") + m + " --out " + (dir / "f.csv").string() +
                       " --features ls").code == 0);
  const auto csv = clothkit::load_features(dir / "f.csv");
  CHECK(csv.dimension == 183);

  testutil::write_bytes(dir / "empty.csv", "depth,mask,label,item\n");
  REQUIRE(run(dir, "-q extract --manifest " + (dir / "empty.csv").string() + " --out " +
                       (dir / "e.bin").string() + " --fit-codebook").code == 0);
  CHECK(clothkit::load_features(dir / "e.bin").records.empty());
}

TEST_CASE("crossval on separable data, with metadata") {
  testutil::TempDir dir;
  const auto data = make_dataset(dir, 16);
  const std::string m = (data / "manifest.csv").string();
  const auto r = run(dir, std::string("-q crossval --manifest ") + m + " --out " + (dir / "cv").string() + " " + kFast);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean accuracy 1.0000") != std::string::npos);
  const auto summary = testutil::read_bytes(dir / "cv" / "summary.csv");
  CHECK(summary_value(summary, "mean_accuracy") == "1.000000");
  CHECK(summary_value(summary, "config_hash").size() == 16);
  CHECK(summary_value(summary, "seed") == "42");
  CHECK(summary_value(summary, "feature_set") == "lbp+si+tsd+bsp");
  CHECK(testutil::read_bytes(dir / "cv" / "confusion.csv").rfind("# clothkit-crossval", 0) == 0);

  const auto rep = run(dir, "report " + (dir / "cv").string());
  REQUIRE(rep.code == 0);
  CHECK(rep.out.find("overall,32,1.0000") != std::string::npos);
  CHECK(rep.out.rfind("# clothkit-crossval config_hash=", 0) == 0);

  REQUIRE(run(dir, std::string("-q crossval --manifest ") + m + " --out " + (dir / "cv2").string() + " " + kFast +
                       " --features si --seed 3").code == 0);
  const auto other = testutil::read_bytes(dir / "cv2" / "summary.csv");
  CHECK(summary_value(other, "feature_set") == "si");
  CHECK(summary_value(other, "seed") == "3");
  CHECK(summary_value(other, "config_hash") != summary_value(summary, "config_hash"));
}

TEST_CASE("train then predict") {
  testutil::TempDir dir;
  const auto data = make_dataset(dir, 6, "train");
  testutil::write_bytes(dir / "spec2.txt", std::string(kSpec) + "seed=99\n");
  REQUIRE(run(dir, "-q synth --spec " + (dir / "spec2.txt").string() + " --out " + (dir / "test").string() +
                       " -n 4").code == 0);
  const auto model = (dir / "m.svm").string();
  REQUIRE(run(dir, "-q train --manifest " + (data / "manifest.csv").string() + " --model " + model +
                       " --set codebook_k=16").code == 0);
  CHECK(fs::exists(model + ".llcb"));

  const auto p = run(dir, "-q predict --model " + model + " --manifest " + (dir / "test" / "manifest.csv").string());
  REQUIRE(p.code == 0);
  std::istringstream in(p.out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# clothkit-predict", 0) == 0);
  std::getline(in, line);
  CHECK(line == "path,predicted,narrow,wide");
  int rows = 0, right = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto path = line.substr(0, c1);
    const auto pred = line.substr(c1 + 1, c2 - c1 - 1);
    right += path.rfind(pred + "_", 0) == 0;
  }
  CHECK(rows == 8);
  CHECK(right == 8);

  // self-accuracy on the training manifest
  const auto self = run(dir, "-q predict --model " + model + " --manifest " + (data / "manifest.csv").string());
  REQUIRE(self.code == 0);
  int self_rows = 0, self_right = 0;
  std::istringstream self_in(self.out);
  std::getline(self_in, line);
  std::getline(self_in, line);
  while (std::getline(self_in, line)) {
    ++self_rows;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    self_right += line.rfind(line.substr(c1 + 1, c2 - c1 - 1) + "_", 0) == 0;
  }
  CHECK(self_rows == 12);
  CHECK(self_right == 12);

  // single full-size sample
  REQUIRE(run(dir, "-q synth --out " + (dir / "full").string() + " -n 1").code == 0);
  const auto start = std::chrono::steady_clock::now();
  const auto single = run(dir, "-q predict --model " + model + " --depth " + (dir / "full" / "wide_0000.pgm").string() +
                                   " --mask " + (dir / "full" / "wide_0000_mask.pgm").string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(single.code == 0);
  CHECK(count_lines(single.out) == 3);
  CHECK(secs < 5.0);

  // a codebook of the wrong size cannot feed this model
  REQUIRE(run(dir, "-q codebook --manifest " + (data / "manifest.csv").string() + " --out " +
                       (dir / "k8.llcb").string() + " --set codebook_k=8").code == 0);
  const auto bad = run(dir, "-q predict --model " + model + " --codebook " + (dir / "k8.llcb").string() +
                                " --manifest " + (dir / "test" / "manifest.csv").string());
  CHECK(bad.code == 3);
  CHECK(bad.err.find("K=8") != std::string::npos);
  CHECK(bad.err.find("D=299") != std::string::npos);

  CHECK(run(dir, "-q predict --model " + model).code == 2);
}
