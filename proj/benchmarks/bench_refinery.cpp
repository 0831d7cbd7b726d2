#include <benchmark/benchmark.h>

#include "refinery/bucbam.hpp"
#include "refinery/eval.hpp"
#include "refinery/probe.hpp"
#include "refinery/rng.hpp"
#include "refinery/splitters.hpp"
#include "refinery/synth.hpp"

using namespace refinery;

namespace {

FeatureMatrix random_points(std::size_t n, std::size_t dim,
                            std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m(n, dim);
  for (auto& v : m.values) v = rng.normal() * 3.0;
  return m;
}

void BM_KMeansFit(benchmark::State& state) {
  const auto points =
      random_points(std::size_t(state.range(0)), 16, 7);
  const int k = int(state.range(1));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kmeans_fit(points, k, seed++));
  }
}
BENCHMARK(BM_KMeansFit)->Args({180, 32})->Args({500, 16})->Args({1000, 8});

void BM_ProbeEpoch(benchmark::State& state) {
  SynthSpec spec;
  spec.samples_per_subconcept = int(state.range(0));
  const SourceData src = generate_source(spec);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_probe(src.dataset, 128, cfg));
  }
}
BENCHMARK(BM_ProbeEpoch)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_BucbamSplit(benchmark::State& state) {
  SynthSpec spec;
  const SourceData src = generate_source(spec);
  BucbamConfig cfg;
  cfg.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bucbam_split(src.dataset, cfg));
  }
}
BENCHMARK(BM_BucbamSplit)->Unit(benchmark::kMillisecond);

void BM_AveragePrecision(benchmark::State& state) {
  Rng rng(9);
  const std::size_t n = std::size_t(state.range(0));
  std::vector<double> scores(n);
  std::vector<char> rel(n, 0);
  for (auto& s : scores) s = rng.uniform();
  for (std::size_t i = 0; i < n; i += 3) rel[i] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_precision(scores, rel));
  }
}
BENCHMARK(BM_AveragePrecision)->Arg(1000)->Arg(10000);

void BM_AdjustedRandIndex(benchmark::State& state) {
  Rng rng(11);
  const std::size_t n = std::size_t(state.range(0));
  std::vector<int> a(n), b(n);
  for (auto& v : a) v = int(rng.below(30));
  for (auto& v : b) v = int(rng.below(30));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adjusted_rand_index(a, b));
  }
}
BENCHMARK(BM_AdjustedRandIndex)->Arg(1800)->Arg(10000);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
