#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "clothkit/depthio.hpp"
#include "clothkit/error.hpp"
#include "clothkit/rng.hpp"

namespace clothkit {

void SynthSpec::check() const {
  if (width < kMinAnalysisSide || height < kMinAnalysisSide) {
    throw Error(ErrorKind::Config, "synthetic surface must be at least 16x16");
  }
  if (!(ridge_width_sigma > 0)) throw Error(ErrorKind::Config, "ridge_width_sigma must be > 0");
  if (!(ridge_height > 0)) throw Error(ErrorKind::Config, "ridge_height must be > 0");
  if (wrinkles_min < 0 || wrinkles_min > wrinkles_max) {
    throw Error(ErrorKind::Config, "wrinkle count range must satisfy 0 <= min <= max");
  }
  if (noise_sigma < 0) throw Error(ErrorKind::Config, "noise_sigma must be >= 0");
  if (width_jitter < 0 || width_jitter >= 1 || height_jitter < 0 || height_jitter >= 1) {
    throw Error(ErrorKind::Config, "jitter fractions must lie in [0, 1)");
  }
  if (!(length_min > 0) || length_min > length_max) {
    throw Error(ErrorKind::Config, "ridge length range must satisfy 0 < min <= max");
  }
}

namespace {

double segment_distance_sq(const RidgeSegment& r, double px, double py) {
  const double vx = r.x1 - r.x0;
  const double vy = r.y1 - r.y0;
  const double len_sq = vx * vx + vy * vy;
  double t = 0;
  if (len_sq > 0) t = std::clamp(((px - r.x0) * vx + (py - r.y0) * vy) / len_sq, 0.0, 1.0);
  const double dx = px - (r.x0 + t * vx);
  const double dy = py - (r.y0 + t * vy);
  return dx * dx + dy * dy;
}

}  // namespace

DepthMap render_ridges(int width, int height, double base_depth,
                       const std::vector<RidgeSegment>& ridges) {
  DepthMap map(width, height, base_depth);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double lift = 0;
      for (const auto& r : ridges) {
        const double d2 = segment_distance_sq(r, x, y);
        lift = std::max(lift, r.height * std::exp(-d2 / (2.0 * r.sigma * r.sigma)));
      }
      map.depth(x, y) = base_depth + lift;
    }
  }
  return map;
}

DepthMap synth_surface(const SynthSpec& spec) {
  spec.check();
  Rng rng(spec.seed);

  const int count = spec.wrinkles_min +
                    static_cast<int>(rng.index(static_cast<std::uint64_t>(spec.wrinkles_max - spec.wrinkles_min + 1)));
  const double side = std::min(spec.width, spec.height);

  std::vector<RidgeSegment> ridges;
  ridges.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double cx = rng.uniform(0.1, 0.9) * spec.width;
    const double cy = rng.uniform(0.1, 0.9) * spec.height;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double half = 0.5 * side * rng.uniform(spec.length_min, spec.length_max);
    const double sigma = spec.ridge_width_sigma * (1.0 + spec.width_jitter * rng.uniform(-1.0, 1.0));
    const double amp = spec.ridge_height * (1.0 + spec.height_jitter * rng.uniform(-1.0, 1.0));
    ridges.push_back({cx - half * std::cos(angle), cy - half * std::sin(angle),
                      cx + half * std::cos(angle), cy + half * std::sin(angle), sigma, amp});
  }

  auto map = render_ridges(spec.width, spec.height, spec.base_depth, ridges);
  if (spec.noise_sigma > 0) {
    for (auto& v : map.depth.values()) v += spec.noise_sigma * rng.normal();
  }
  return map;
}

namespace {

SynthSpec read_spec(const KeyValueConfig& config, const std::string& prefix, SynthSpec s) {
  const auto key = [&](const std::string& name) {
    return !prefix.empty() && config.contains(prefix + name) ? prefix + name : name;
  };
  s.class_id = static_cast<int>(config.get_int(key("class_id"), s.class_id));
  s.width = static_cast<int>(config.get_int(key("width"), s.width));
  s.height = static_cast<int>(config.get_int(key("height"), s.height));
  s.wrinkles_min = static_cast<int>(config.get_int(key("wrinkles_min"), s.wrinkles_min));
  s.wrinkles_max = static_cast<int>(config.get_int(key("wrinkles_max"), s.wrinkles_max));
  s.ridge_width_sigma = config.get_double(key("ridge_width_sigma"), s.ridge_width_sigma);
  s.ridge_height = config.get_double(key("ridge_height"), s.ridge_height);
  s.base_depth = config.get_double(key("base_depth"), s.base_depth);
  s.noise_sigma = config.get_double(key("noise_sigma"), s.noise_sigma);
  s.width_jitter = config.get_double(key("width_jitter"), s.width_jitter);
  s.height_jitter = config.get_double(key("height_jitter"), s.height_jitter);
  s.length_min = config.get_double(key("length_min"), s.length_min);
  s.length_max = config.get_double(key("length_max"), s.length_max);
  s.seed = config.get_uint64(key("seed"), s.seed);
  s.check();
  return s;
}

}  // namespace

SynthSpec synth_spec_from_config(const KeyValueConfig& config, const std::string& prefix) {
  return read_spec(config, prefix, SynthSpec{});
}

void SynthDatasetSpec::check() const {
  if (classes.empty()) throw Error(ErrorKind::Config, "synthetic dataset needs at least one class");
  if (per_class.size() != classes.size()) {
    throw Error(ErrorKind::Config, "synthetic dataset has " + std::to_string(per_class.size()) + " specs for " +
                                       std::to_string(classes.size()) + " classes");
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].empty() || classes[i].find_first_of(",\"\n\r/\\") != std::string::npos) {
      throw Error(ErrorKind::Config, "invalid class name '" + classes[i] + "'");
    }
    if (std::find(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(i), classes[i]) !=
        classes.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw Error(ErrorKind::Config, "duplicate class name '" + classes[i] + "'");
    }
    per_class[i].check();
  }
  if (samples_per_item < 1) throw Error(ErrorKind::Config, "samples_per_item must be >= 1");
  if (!(item_jitter >= 0 && item_jitter < 1)) throw Error(ErrorKind::Config, "item_jitter must lie in [0, 1)");
}

SynthDatasetSpec default_synth_dataset() {
  SynthDatasetSpec d;
  d.classes = {"narrow", "medium", "wide"};
  const double sigma[] = {4, 8, 14};
  const double height[] = {15, 25, 35};
  for (int c = 0; c < 3; ++c) {
    SynthSpec s;
    s.class_id = c;
    s.wrinkles_min = 10;
    s.wrinkles_max = 16;
    s.ridge_width_sigma = sigma[c];
    s.ridge_height = height[c];
    s.noise_sigma = 0.3;
    s.width_jitter = 0.15;
    s.height_jitter = 0.15;
    d.per_class.push_back(s);
  }
  return d;
}

SynthDatasetSpec synth_dataset_from_config(const KeyValueConfig& config) {
  const auto defaults = default_synth_dataset();
  SynthDatasetSpec d;
  if (const auto names = config.get("classes")) {
    std::stringstream ss(*names);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto b = name.find_first_not_of(" \t");
      const auto e = name.find_last_not_of(" \t");
      d.classes.push_back(b == std::string::npos ? std::string{} : name.substr(b, e - b + 1));
    }
  } else {
    d.classes = defaults.classes;
  }
  for (std::size_t i = 0; i < d.classes.size(); ++i) {
    const auto it = std::find(defaults.classes.begin(), defaults.classes.end(), d.classes[i]);
    SynthSpec base = it != defaults.classes.end() ? defaults.per_class[static_cast<std::size_t>(it - defaults.classes.begin())]
                                                  : SynthSpec{};
    base.class_id = static_cast<int>(i);
    d.per_class.push_back(read_spec(config, d.classes[i] + ".", base));
    d.per_class.back().class_id = static_cast<int>(i);
  }
  d.samples_per_item = static_cast<int>(config.get_int("samples_per_item", d.samples_per_item));
  d.item_jitter = config.get_double("item_jitter", d.item_jitter);
  d.seed = config.get_uint64("seed", d.seed);
  d.check();
  return d;
}

SynthSample synth_sample(const SynthDatasetSpec& spec, int class_index, int index) {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= spec.classes.size() || index < 0) {
    throw Error(ErrorKind::Domain, "synthetic sample index out of range");
  }
  const auto c = static_cast<std::size_t>(class_index);
  const int item = index / spec.samples_per_item;
  const int sample = index % spec.samples_per_item;
  Rng rng(mix_seed(mix_seed(spec.seed, c), static_cast<std::uint64_t>(item)));
  SynthSpec s = spec.per_class[c];
  s.ridge_width_sigma *= 1.0 + spec.item_jitter * rng.uniform(-1.0, 1.0);
  s.ridge_height *= 1.0 + spec.item_jitter * rng.uniform(-1.0, 1.0);
  s.seed = mix_seed(rng.next(), static_cast<std::uint64_t>(sample));

  char id[32];
  std::snprintf(id, sizeof id, "_%03d", item);
  return {synth_surface(s), class_index, spec.classes[c] + id};
}

}  // namespace clothkit
