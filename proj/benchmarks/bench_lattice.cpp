#include <benchmark/benchmark.h>

#include "stochlab/lattice.hpp"

namespace {

void BM_LabelClusters(benchmark::State& state) {
  const auto lat = stochlab::make_lattice(2, static_cast<int>(state.range(0)), stochlab::Boundary::open);
  const auto sample = stochlab::sample_percolation(lat, stochlab::PercolationMode::bond, 0.5, 7);
  for (auto _ : state) benchmark::DoNotOptimize(stochlab::label_clusters(sample));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lat->vertex_count()));
}
BENCHMARK(BM_LabelClusters)->Arg(64)->Arg(256)->Arg(1024);

void BM_SamplePercolation(benchmark::State& state) {
  const auto lat = stochlab::make_lattice(2, static_cast<int>(state.range(0)), stochlab::Boundary::open);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stochlab::sample_percolation(lat, stochlab::PercolationMode::bond, 0.5, ++seed));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lat->edge_count()));
}
BENCHMARK(BM_SamplePercolation)->Arg(256)->Arg(1024);

}  // namespace
