#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "clothkit/diagnostics.hpp"
#include "clothkit/error.hpp"
#include "clothkit/pipeline.hpp"

using namespace clothkit;

namespace {

DepthMap sample_surface(std::uint64_t seed, double sigma = 6.0) {
  SynthSpec s;
  s.width = 96;
  s.height = 96;
  s.wrinkles_min = 4;
  s.wrinkles_max = 6;
  s.ridge_width_sigma = sigma;
  s.ridge_height = 20;
  s.noise_sigma = 0.2;
  s.seed = seed;
  return synth_surface(s);
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.codebook_size = 8;
  c.bsp.stride = 4;
  return c;
}

}  // namespace

TEST_CASE("key=value parsing") {
  const auto c = KeyValueConfig::parse("# comment\n\n a = 1 \nb=x y\nlist=0.1, 0.2,0.3\na=2\n");
  CHECK(c.get_int("a", 0) == 2);
  CHECK(c.get_string("b", "") == "x y");
  CHECK(c.get_doubles("list", {}) == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(c.get_double("missing", 1.5) == 1.5);
  CHECK_THROWS_AS(c.get_double("b", 0), Error);
  CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), Error);
  auto d = c;
  d.apply_override("b=z");
  CHECK(d.get_string("b", "") == "z");
  CHECK_THROWS_AS(d.apply_override("=3"), Error);
  CHECK(KeyValueConfig::parse(c.serialize()).entries() == c.entries());
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(to_hex(0xabcULL) == "0000000000000abc");
}

TEST_CASE("pipeline config round trips through key=value text") {
  PipelineConfig p;
  p.codebook_size = 64;
  p.ridge_thresholds = {0.03, 0.07};
  p.features = FeatureSet::parse("lbp+bsp");
  p.svm_gamma = 0.25;
  p.pool_l2 = false;
  p.si_scheme = QuantizationScheme::Koenderink;
  p.seed = 7;
  const auto back = PipelineConfig::from_config(KeyValueConfig::parse(p.to_config().serialize()));
  CHECK(back.to_config().serialize() == p.to_config().serialize());
  CHECK(back.hash() == p.hash());
  CHECK(back.codebook_size == 64);
  CHECK(back.ridge_thresholds == p.ridge_thresholds);
  CHECK(back.features == p.features);
  CHECK(back.svm_gamma == 0.25);
  CHECK_FALSE(back.pool_l2);
  CHECK(back.si_scheme == QuantizationScheme::Koenderink);
}

TEST_CASE("the config hash tracks every setting") {
  const PipelineConfig base;
  auto a = base;
  a.llc_k = 6;
  auto b = base;
  b.seed = 43;
  auto c = base;
  c.piecewise.smoothness = 2e-6;
  CHECK(a.hash() != base.hash());
  CHECK(b.hash() != base.hash());
  CHECK(c.hash() != base.hash());
  CHECK(PipelineConfig{}.hash() == base.hash());
}

TEST_CASE("gamma defaults to 10 over the fused dimension") {
  PipelineConfig p;
  CHECK(p.dimension() == 539);
  CHECK(p.gamma() == doctest::Approx(10.0 / 539));
  p.codebook_size = 64;
  CHECK(p.dimension() == 347);
  CHECK(p.gamma() == doctest::Approx(10.0 / 347));
  p.features = FeatureSet::parse("si");
  CHECK(p.gamma() == doctest::Approx(10.0 / 9));
  p.svm_gamma = 0.5;
  CHECK(p.gamma() == 0.5);
  const auto q = PipelineConfig::from_config(KeyValueConfig::parse("codebook_k=64\n"));
  CHECK(q.gamma() == doctest::Approx(10.0 / 347));
}

TEST_CASE("pool_norm accepts l2 and none only") {
  CHECK(PipelineConfig::from_config(KeyValueConfig::parse("pool_norm=none\n")).pool_l2 == false);
  CHECK(PipelineConfig::from_config(KeyValueConfig::parse("pool_norm=l2\n")).pool_l2 == true);
  CHECK_THROWS_AS(PipelineConfig::from_config(KeyValueConfig::parse("pool_norm=max\n")), Error);
}

TEST_CASE("invalid settings are config errors") {
  const auto bad = [](const char* text) {
    try {
      PipelineConfig::from_config(KeyValueConfig::parse(text)).check();
    } catch (const Error& e) {
      return e.kind() == ErrorKind::Config;
    }
    return false;
  };
  CHECK(bad("majority_window=4\n"));
  CHECK(bad("llc_k=0\n"));
  CHECK(bad("codebook_k=2\nllc_k=5\n"));
  CHECK(bad("svm_c=0\n"));
  CHECK(bad("folds=1\n"));
  CHECK(bad("bsp_patch=40\n"));
  CHECK(bad("depth_sign=0.5\n"));
  CHECK(bad("features=xyz\n"));
  CHECK(bad("si_scheme=other\n"));
  CHECK(bad("ridge_thresholds=\n"));
  CHECK_NOTHROW(PipelineConfig{}.check());
}

TEST_CASE("unknown keys are reported, not fatal") {
  std::vector<std::string> seen;
  set_diagnostic_sink([&](std::string_view m) { seen.emplace_back(m); });
  PipelineConfig::from_config(KeyValueConfig::parse("colour=red\nsynth.classes=a\n"));
  set_diagnostic_sink(nullptr);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].find("colour") != std::string::npos);
}

TEST_CASE("preprocessing flips and downsamples") {
  DepthMap m(8, 6, 100.0);
  m.depth(2, 2) = 110;
  PipelineConfig p;
  p.depth_sign = -1;
  const auto flipped = preprocess(m, p);
  CHECK(flipped.depth(2, 2) == -110);
  p.depth_sign = 1;
  p.downsample = 2;
  const auto half = preprocess(m, p);
  CHECK(half.width() == 4);
  CHECK(half.height() == 3);
}

TEST_CASE("images below the analysis size are rejected") {
  CHECK_THROWS_AS(extract_image(DepthMap(12, 40, 500.0), PipelineConfig{}), Error);
}

TEST_CASE("extracted blocks have the configured sizes and are deterministic") {
  const auto cfg = small_config();
  const auto map = sample_surface(5);
  const auto a = extract_image(map, cfg);
  const auto b = extract_image(map, cfg);
  CHECK_FALSE(a.failed);
  CHECK(a.lbp.values.size() == 174);
  CHECK(a.si.values.size() == 9);
  CHECK(a.tsd.values.size() == 100);
  REQUIRE_FALSE(a.bsp.empty());
  for (const auto& d : a.bsp) CHECK(d.values.size() == 25);
  CHECK(a.lbp.values == b.lbp.values);
  CHECK(a.si.values == b.si.values);
  CHECK(a.tsd.values == b.tsd.values);
  REQUIRE(a.bsp.size() == b.bsp.size());
  for (std::size_t i = 0; i < a.bsp.size(); ++i) CHECK(a.bsp[i].values == b.bsp[i].values);

  const auto z = zero_features(cfg);
  CHECK(z.lbp.values == std::vector<double>(174, 0.0));
  CHECK(z.bsp.empty());
}

TEST_CASE("surface analysis finds ridges, contours and TSD samples") {
  const auto s = analyze_surface(sample_surface(6, 8.0), PipelineConfig{});
  CHECK_FALSE(s.topology.ridges.empty());
  CHECK_FALSE(s.topology.contours.empty());
  CHECK(s.tsd.size() == s.topology.ridges.size());
  for (const auto& t : s.tsd) CHECK(t.width >= 0);
}

TEST_CASE("codebook learning and encoding") {
  const auto cfg = small_config();
  std::vector<ImageFeatures> images{extract_image(sample_surface(1), cfg), extract_image(sample_surface(2), cfg)};
  const std::vector<const ImageFeatures*> ptrs{&images[0], &images[1]};
  const auto cb = learn_codebook(ptrs, cfg, 3);
  const auto again = learn_codebook(ptrs, cfg, 3);
  CHECK(cb.size == 8);
  CHECK(cb.dimension == 25);
  CHECK(cb.atoms == again.atoms);

  const auto pooled = encode_bsp(images[0], cb, cfg);
  REQUIRE(pooled.size() == 8);
  double sq = 0;
  for (const double v : pooled) sq += v * v;
  CHECK(sq == doctest::Approx(1.0));

  auto raw_cfg = cfg;
  raw_cfg.pool_l2 = false;
  const auto raw = encode_bsp(images[0], cb, raw_cfg);
  double sum = 0;
  for (const double v : raw) sum += v;
  // LLC codes sum to one, so the raw pool sums to the descriptor count
  CHECK(sum == doctest::Approx(static_cast<double>(images[0].bsp.size())));

  const auto v = encode_image(images[0], &cb, cfg);
  CHECK(v.values.size() == cfg.dimension());
  CHECK_THROWS_AS(encode_image(images[0], nullptr, cfg), Error);
  auto lsi = cfg;
  lsi.features = FeatureSet::parse("ls");
  CHECK(encode_image(images[0], nullptr, lsi).values.size() == 183);
}
