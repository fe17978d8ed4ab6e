#include <benchmark/benchmark.h>

#include "stochlab/walks.hpp"

namespace {

void BM_IntervalExit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::interval_exit(n, ++seed));
}
BENCHMARK(BM_IntervalExit)->Arg(10)->Arg(100)->Arg(1000);

void BM_FirstPassage(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::first_passage(100, ++seed));
}
BENCHMARK(BM_FirstPassage);

void BM_PlanarExit(benchmark::State& state) {
  const double r = static_cast<double>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::planar_disk_exit(r, ++seed));
}
BENCHMARK(BM_PlanarExit)->Arg(16)->Arg(64);

void BM_LimitCdf(benchmark::State& state) {
  double t = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stochlab::limit_exit_cdf(t));
    t = t > 5.0 ? 0.01 : t * 1.1;
  }
}
BENCHMARK(BM_LimitCdf);

}  // namespace
