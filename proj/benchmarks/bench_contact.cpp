#include <benchmark/benchmark.h>

#include "stochlab/contact.hpp"

namespace {

void BM_ContactNearCritical(benchmark::State& state) {
  const auto w = stochlab::make_lattice(1, 200, stochlab::Boundary::open);
  stochlab::Configuration full(w->vertex_count(), stochlab::SiteState::occupied);
  std::uint64_t seed = 0;
  std::int64_t events = 0;
  for (auto _ : state) {
    const auto s = stochlab::run_contact({1.65, w}, full, 50.0, ++seed);
    events += static_cast<std::int64_t>(s.events);
  }
  state.SetItemsProcessed(events);
}
BENCHMARK(BM_ContactNearCritical)->Unit(benchmark::kMillisecond);

void BM_IdleContact(benchmark::State& state) {
  const auto w = stochlab::make_lattice(2, 40, stochlab::Boundary::open);
  stochlab::Configuration init(w->vertex_count(), stochlab::SiteState::vacant);
  init[w->center()] = stochlab::SiteState::occupied;
  init = stochlab::with_idle_background(init);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stochlab::run_idle_contact({{0.8, w}, 1.0}, init, 20.0, ++seed));
  }
}
BENCHMARK(BM_IdleContact)->Unit(benchmark::kMillisecond);

}  // namespace
