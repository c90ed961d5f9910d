#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "clothkit/bspline.hpp"
#include "clothkit/coding.hpp"
#include "clothkit/diagnostics.hpp"
#include "clothkit/pipeline.hpp"

using namespace clothkit;

namespace {

DepthMap wrinkled(int size, std::uint64_t seed) {
  SynthSpec s;
  s.width = size;
  s.height = size;
  s.wrinkles_min = 10;
  s.wrinkles_max = 16;
  s.noise_sigma = 0.3;
  s.seed = seed;
  return synth_surface(s);
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = g(rng);
  return m;
}

void BM_PatchFit41(benchmark::State& state) {
  const auto map = wrinkled(64, 1);
  const auto kv = KnotVector::open_uniform(4, 5);
  const PatchFitter fitter(41, 41, kv, kv);
  std::vector<double> samples(41 * 41);
  for (int y = 0; y < 41; ++y)
    for (int x = 0; x < 41; ++x) samples[static_cast<std::size_t>(y * 41 + x)] = map.depth(x, y);
  for (auto _ : state) benchmark::DoNotOptimize(fitter.fit(samples, {0, 0, 41, 41}));
}
BENCHMARK(BM_PatchFit41);

void BM_PiecewiseSmoothing(benchmark::State& state) {
  const auto map = wrinkled(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_surface_piecewise(map));
}
BENCHMARK(BM_PiecewiseSmoothing)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const auto samples = gaussian(static_cast<std::size_t>(state.range(0)), 25, 3);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(samples, KMeansOptions{64, 20, 4, 0.005}));
}
BENCHMARK(BM_KMeans)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_LlcEncode(benchmark::State& state) {
  const auto atoms = kmeans(gaussian(4000, 25, 5), KMeansOptions{256, 10, 6, 0.005});
  const auto queries = gaussian(1024, 25, 7);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(llc_encode(queries.row(i), atoms, 5, 1e-4));
    i = (i + 1) % queries.rows;
  }
}
BENCHMARK(BM_LlcEncode);

void BM_ExtractImage(benchmark::State& state) {
  const auto map = wrinkled(256, 8);
  const PipelineConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(extract_image(map, config));
}
BENCHMARK(BM_ExtractImage)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  set_diagnostic_sink(nullptr);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
