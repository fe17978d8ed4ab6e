#include <benchmark/benchmark.h>

#include "stochlab/network.hpp"

namespace {

void BM_EscapeProbabilityFullBox(benchmark::State& state) {
  const int radius = static_cast<int>(state.range(0));
  const auto lat = stochlab::make_lattice(2, 2 * radius + 1, stochlab::Boundary::open);
  const auto sample = stochlab::sample_percolation(lat, stochlab::PercolationMode::bond, 1.0, 1);
  const auto net = stochlab::network_from_sample(sample, lat->center());
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::escape_probability(net, radius));
}
BENCHMARK(BM_EscapeProbabilityFullBox)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EscapeFrequency(benchmark::State& state) {
  const auto lat = stochlab::make_lattice(2, 41, stochlab::Boundary::open);
  const auto sample = stochlab::sample_percolation(lat, stochlab::PercolationMode::bond, 1.0, 1);
  const auto net = stochlab::network_from_sample(sample, lat->center());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::escape_frequency(net, 10, 10'000, ++seed));
  state.SetItemsProcessed(state.iterations() * 10'000);
}
BENCHMARK(BM_EscapeFrequency)->Unit(benchmark::kMillisecond);

}  // namespace
