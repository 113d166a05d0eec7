#include <benchmark/benchmark.h>

#include "reid/distance.hpp"
#include "reid/sampling.hpp"

using namespace reid;

static Matrix random_features(std::size_t n, std::size_t d) {
  Rng rng(42);
  Matrix m(n, d);
  for (double& x : m.data) x = rng.normal();
  return m;
}

static void BM_PairwiseSerial(benchmark::State& state) {
  const Matrix f = random_features(state.range(0), 64);
  for (auto _ : state) {
    auto d = pairwise_distances_serial(f);
    benchmark::DoNotOptimize(d.d.data.data());
  }
}
BENCHMARK(BM_PairwiseSerial)->Arg(128)->Arg(512)->Arg(1024);

static void BM_PairwiseOpenMP(benchmark::State& state) {
  const Matrix f = random_features(state.range(0), 64);
  for (auto _ : state) {
    auto d = pairwise_distances(f);
    benchmark::DoNotOptimize(d.d.data.data());
  }
}
BENCHMARK(BM_PairwiseOpenMP)->Arg(128)->Arg(512)->Arg(1024);

BENCHMARK_MAIN();
