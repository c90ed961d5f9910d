#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "clothkit/depthio.hpp"
#include "clothkit/error.hpp"
#include "helpers.hpp"

using namespace clothkit;

namespace {

std::string p5_16(int w, int h, const std::vector<int>& samples) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  for (int v : samples) {
    s += static_cast<char>((v >> 8) & 0xff);
    s += static_cast<char>(v & 0xff);
  }
  return s;
}

std::string p5_8(int w, int h, const std::vector<int>& samples) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (int v : samples) s += static_cast<char>(v);
  return s;
}

}  // namespace

TEST_CASE("constant 4x4 P5 depth decodes to millimetres") {
  testutil::TempDir dir;
  testutil::write_bytes(dir / "d.pgm", p5_16(4, 4, std::vector<int>(16, 1000)));
  testutil::write_bytes(dir / "m.pgm", p5_8(4, 4, std::vector<int>(16, 255)));
  const auto map = load_depth(dir / "d.pgm", dir / "m.pgm");
  CHECK(map.width() == 4);
  CHECK(map.height() == 4);
  for (double v : map.depth.values()) CHECK(v == 1000.0);
  for (auto m : map.mask.values()) CHECK(m != 0);
}

TEST_CASE("big-endian sample order and sparse mask") {
  testutil::TempDir dir;
  testutil::write_bytes(dir / "d.pgm", p5_16(2, 1, {0x0102, 65535}));
  testutil::write_bytes(dir / "m.pgm", p5_8(2, 1, {0, 7}));
  const auto map = load_depth(dir / "d.pgm", dir / "m.pgm");
  CHECK(map.depth(0, 0) == 258.0);
  CHECK(map.depth(1, 0) == 65535.0);
  CHECK(!map.valid(0, 0));
  CHECK(map.valid(1, 0));
}

TEST_CASE("mask with different dimensions is a consistency error") {
  testutil::TempDir dir;
  testutil::write_bytes(dir / "d.pgm", p5_16(4, 4, std::vector<int>(16, 5)));
  testutil::write_bytes(dir / "m.pgm", p5_8(5, 4, std::vector<int>(20, 1)));
  try {
    load_depth(dir / "d.pgm", dir / "m.pgm");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Consistency);
  }
}

TEST_CASE("malformed headers are format errors") {
  testutil::TempDir dir;
  const std::vector<std::string> bad = {"P2\n1 1\n65535\n00", "P5\n4\n", "P5\nx 4\n65535\n",
                                        "P5\n2 2\n65535\n\x01", "P5\n0 2\n65535\n"};
  for (const auto& b : bad) {
    testutil::write_bytes(dir / "bad.pgm", b);
    try {
      load_depth(dir / "bad.pgm");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  }
}

TEST_CASE("missing file is an io error") {
  try {
    load_depth("/nonexistent/depth.pgm");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}

TEST_CASE("save_depth of a loaded canonical file is byte-identical") {
  testutil::TempDir dir;
  std::vector<int> samples(7 * 5);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = static_cast<int>((i * 7919) % 65536);
  const auto original = p5_16(7, 5, samples);
  testutil::write_bytes(dir / "a.pgm", original);
  save_depth(dir / "b.pgm", load_depth(dir / "a.pgm"));
  CHECK(testutil::read_bytes(dir / "b.pgm") == original);
}

TEST_CASE("mask round trip") {
  testutil::TempDir dir;
  DepthMap map(5, 3, 10.0);
  map.mask(1, 1) = 0;
  map.mask(4, 2) = 0;
  save_depth(dir / "d.pgm", map);
  save_mask(dir / "m.pgm", map);
  const auto back = load_depth(dir / "d.pgm", dir / "m.pgm");
  CHECK(back.mask == map.mask);
}

TEST_CASE("check rejects non-finite masked depth and small maps") {
  DepthMap map(16, 16, 1.0);
  map.check(true);
  map.depth(3, 3) = std::nan("");
  CHECK_THROWS_AS(map.check(), Error);
  map.mask(3, 3) = 0;
  CHECK_NOTHROW(map.check());
  DepthMap small(15, 20, 1.0);
  CHECK_NOTHROW(small.check());
  CHECK_THROWS_AS(small.check(true), Error);
}

TEST_CASE("downsample averages valid pixels") {
  DepthMap map(4, 2, 0.0);
  map.depth(0, 0) = 1;
  map.depth(1, 0) = 3;
  map.depth(0, 1) = 5;
  map.mask(1, 1) = 0;
  map.depth(1, 1) = 1000;
  const auto d = downsample(map, 2);
  CHECK(d.width() == 2);
  CHECK(d.height() == 1);
  CHECK(d.depth(0, 0) == doctest::Approx(3.0));
  CHECK(d.valid(0, 0));
  CHECK(downsample(map, 1) == map);
  CHECK_THROWS_AS(downsample(map, 0), Error);
}

TEST_CASE("zero wrinkles and no noise give a constant plane") {
  SynthSpec s;
  s.wrinkles_min = s.wrinkles_max = 0;
  s.base_depth = 500;
  const auto map = synth_surface(s);
  for (double v : map.depth.values()) CHECK(v == 500.0);
}

TEST_CASE("synth_surface is a pure function of its spec") {
  SynthSpec s;
  s.noise_sigma = 0.5;
  s.seed = 99;
  CHECK(synth_surface(s) == synth_surface(s));
  auto t = s;
  t.seed = 100;
  CHECK(!(synth_surface(t) == synth_surface(s)));
}

TEST_CASE("single horizontal ridge rises by its height at the crest") {
  const auto map = render_ridges(64, 64, 100.0, {{-10, 32, 80, 32, 6.0, 10.0}});
  for (int x = 0; x < 64; ++x) {
    CHECK(map.depth(x, 32) - 100.0 == doctest::Approx(10.0).epsilon(1e-12));
    // generating Gaussian evaluated analytically one sigma away
    CHECK(map.depth(x, 38) - 100.0 == doctest::Approx(10.0 * std::exp(-0.5)).epsilon(1e-12));
  }
}

TEST_CASE("synth spec validation") {
  SynthSpec s;
  s.ridge_width_sigma = 0;
  CHECK_THROWS_AS(s.check(), Error);
  s = {};
  s.wrinkles_min = 4;
  s.wrinkles_max = 3;
  CHECK_THROWS_AS(s.check(), Error);
  s = {};
  s.width = 8;
  CHECK_THROWS_AS(s.check(), Error);
}

TEST_CASE("manifest parsing") {
  const auto m = parse_manifest("depth,mask,label,item\na.pgm,am.pgm,towel,t1\nb.pgm,,jeans,j1\n", "/data");
  CHECK(m.entries.size() == 2);
  CHECK(m.categories == std::vector<std::string>{"towel", "jeans"});
  CHECK(m.entries[1].mask_path.empty());
  CHECK(m.resolve("a.pgm") == std::filesystem::path("/data/a.pgm"));
  CHECK(m.resolve("/abs/x.pgm") == std::filesystem::path("/abs/x.pgm"));
  CHECK(m.category_index("jeans") == 1);
  CHECK(m.category_index("shirt") == -1);
}

TEST_CASE("manifest columns in any order and declared categories") {
  const auto m = parse_manifest("# categories=b,a\nitem,label,depth,mask\ni1,a,x.pgm,\ni2,b,y.pgm,\n");
  CHECK(m.categories == std::vector<std::string>{"b", "a"});
  CHECK(m.entries[0].depth_path == "x.pgm");
  CHECK(m.entries[0].item_id == "i1");
  CHECK_THROWS_AS(parse_manifest("# categories=b\ndepth,mask,label,item\nx.pgm,,a,i\n"), Error);
  CHECK_THROWS_AS(parse_manifest("depth,label\nx.pgm,a\n"), Error);
  CHECK_THROWS_AS(parse_manifest("depth,mask,label,item\nx.pgm,a\n"), Error);
}

TEST_CASE("missing files are accepted at parse time and fail at load") {
  const auto m = parse_manifest("depth,mask,label,item\nmissing.pgm,,a,i\n", "/nonexistent");
  CHECK(m.entries.size() == 1);
  CHECK_THROWS_AS(m.load_entry(0), Error);
}

TEST_CASE("1050-row manifest") {
  std::string text = "depth,mask,label,item\n";
  const char* cats[] = {"tshirt", "shirt", "sweater", "jeans", "towel"};
  for (int i = 0; i < 1050; ++i) {
    text += "d" + std::to_string(i) + ".pgm,m" + std::to_string(i) + ".pgm," + cats[i % 5] + ",item" +
            std::to_string(i / 21) + "\n";
  }
  const auto m = parse_manifest(text);
  CHECK(m.entries.size() == 1050);
  CHECK(m.categories.size() == 5);
}

TEST_CASE("manifest save and load round trip") {
  testutil::TempDir dir;
  DatasetManifest m;
  m.categories = {"x", "y"};
  m.entries = {{"a.pgm", "am.pgm", "y", "1"}, {"b.pgm", "", "x", "2"}};
  save_manifest(dir / "m.csv", m);
  const auto back = load_manifest(dir / "m.csv");
  CHECK(back.categories == m.categories);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].label == "y");
  CHECK(back.entries[1].mask_path.empty());
  CHECK(back.base_dir == dir.path());
}

TEST_CASE("synthetic dataset groups samples into items") {
  auto spec = default_synth_dataset();
  spec.seed = 3;
  for (auto& s : spec.per_class) s.width = s.height = 32;
  std::set<std::string> items;
  for (int i = 0; i < 10; ++i) items.insert(synth_sample(spec, 1, i).item_id);
  CHECK(items == std::set<std::string>{"medium_000", "medium_001"});
  const auto a = synth_sample(spec, 2, 7);
  const auto b = synth_sample(spec, 2, 7);
  CHECK(a.map == b.map);
  CHECK(a.class_index == 2);
  CHECK(!(synth_sample(spec, 2, 6).map == a.map));
  CHECK_THROWS_AS(synth_sample(spec, 3, 0), Error);
}

TEST_CASE("synthetic dataset config keys") {
  const auto kv = KeyValueConfig::parse(
      "classes=narrow,flat\nsamples_per_item=2\nnoise_sigma=0.5\nflat.ridge_height=3\nflat.wrinkles_min=1\n"
      "flat.wrinkles_max=2\n");
  const auto spec = synth_dataset_from_config(kv);
  CHECK(spec.classes == std::vector<std::string>{"narrow", "flat"});
  CHECK(spec.samples_per_item == 2);
  CHECK(spec.per_class[0].ridge_width_sigma == 4.0);
  CHECK(spec.per_class[0].noise_sigma == 0.5);
  CHECK(spec.per_class[1].ridge_height == 3.0);
  CHECK(spec.per_class[1].wrinkles_max == 2);
  CHECK(spec.per_class[1].class_id == 1);
  CHECK_THROWS_AS(synth_dataset_from_config(KeyValueConfig::parse("classes=a,a\n")), Error);
  CHECK_THROWS_AS(synth_dataset_from_config(KeyValueConfig::parse("samples_per_item=0\n")), Error);
}
