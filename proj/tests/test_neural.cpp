#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stochlab/neural.hpp"
#include "stochlab/rng.hpp"

using namespace stochlab;

namespace {

double q_at(std::size_t k, const NeuralParams& p) {
  return k == 1 ? p.p_nn : std::min(1.0, p.beta * std::pow(static_cast<double>(k), -p.s));
}

// Edges of the synapse graph written out independently: vertex i + N for
// site i, 2N + 1 and 2N + 2 for the sources.
struct Potential {
  std::size_t a;
  std::size_t b;
  double q;
};

std::vector<Potential> oracle_synapses(const NeuralParams& p) {
  std::vector<Potential> out;
  const std::size_t n = 2 * static_cast<std::size_t>(p.N) + 1;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) out.push_back({a, b, q_at(b - a, p)});
  }
  for (std::size_t a = 0; a < n; ++a) {
    out.push_back({a, n, q_at(a + 1, p)});
    out.push_back({a, n + 1, q_at(n - a, p)});
  }
  return out;
}

bool neuron_joined(const NeuralParams& p, const std::vector<Potential>& syn,
                   const std::vector<std::uint8_t>& open, std::size_t neuron) {
  const std::size_t n = 2 * static_cast<std::size_t>(p.N) + 1;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t e = 0; e < syn.size(); ++e) {
    if (open[e]) edges.emplace_back(syn[e].a, syn[e].b);
  }
  return oracle::connected(n + 2, edges, neuron, {n, n + 1});
}

bool log_says_joined(const SpikeLog& log, int site, double t) {
  const auto& on = log.spikes_at(site);
  const auto& off = log.disconnects[static_cast<std::size_t>(site + log.N)];
  const auto j = std::upper_bound(on.begin(), on.end(), t) - on.begin();
  if (j == 0) return false;
  const auto last = static_cast<std::size_t>(j - 1);
  return last >= off.size() || off[last] > t;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("parameter validation") {
  NeuralParams p;
  p.N = -1;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = NeuralParams{};
  p.p_nn = 1.5;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = NeuralParams{};
  p.s = 0.0;
  CHECK_THROWS_AS(validate(p), ConfigError);
  p = NeuralParams{};
  p.mu = 0.0;
  CHECK_THROWS_AS(simulate_neural(p, 1), ConfigError);
  p = NeuralParams{};
  p.beta = -1.0;
  CHECK_THROWS_AS(simulate_neural(p, 1), ConfigError);
}

TEST_CASE("potential synapses follow the distance law") {
  NeuralParams p;
  p.N = 3;
  p.p_nn = 0.3;
  p.beta = 0.8;
  p.s = 1.7;
  const auto lib = potential_synapses(p);
  const auto ref = oracle_synapses(p);
  REQUIRE(lib.size() == ref.size());
  for (std::size_t e = 0; e < ref.size(); ++e) {
    CHECK(lib[e].a == ref[e].a);
    CHECK(lib[e].b == ref[e].b);
    CHECK(lib[e].q == doctest::Approx(ref[e].q).epsilon(1e-15));
  }
}

TEST_CASE("p_nn = 1 gives one spike per neuron at time zero") {
  NeuralParams p;
  p.N = 5;
  p.p_nn = 1.0;
  p.beta = 0.3;
  p.t_max = 20.0;
  const auto log = simulate_neural(p, 4);
  for (int i = -p.N; i <= p.N; ++i) {
    REQUIRE(log.spikes_at(i).size() == 1);
    CHECK(log.spikes_at(i)[0] == 0.0);
    CHECK(log.connected_time[static_cast<std::size_t>(i + p.N)] == p.t_max);
  }
  CHECK(activity(log) == 1.0);
}

TEST_CASE("all probabilities zero gives no spikes") {
  NeuralParams p;
  p.N = 4;
  p.p_nn = 0.0;
  p.beta = 0.0;
  const auto log = simulate_neural(p, 5);
  for (int i = -p.N; i <= p.N; ++i) CHECK(log.spikes_at(i).empty());
  for (double c : log.connected_time) CHECK(c == 0.0);
  CHECK(log.refreshes > 0);
}

TEST_CASE("single neuron interarrivals against the two-synapse chain") {
  NeuralParams p;
  p.N = 0;
  p.p_nn = 0.3;
  p.mu = 1.0;
  const oracle::TwoSynapseChain chain{p.mu, p.p_nn};
  p.t_max = 11'000.0 * chain.mean();
  const auto log = simulate_neural(p, 21);
  const auto stats = interarrival_stats(log, 0);
  REQUIRE(stats.gaps.size() >= 10'000);
  CHECK(ks_statistic(stats.gaps, [&](double t) { return chain.cdf(t); }) < 0.03);
  const auto est = mean_ci(stats.gaps);
  CHECK(std::abs(est.mean - chain.mean()) < 3.0 * est.ci / kCiZ);
  CHECK(stats.mean == doctest::Approx(est.mean));
}

TEST_CASE("snapshot flags at t = 3 / mu are Bernoulli(q)") {
  NeuralParams p;
  p.N = 2;
  p.p_nn = 0.3;
  p.beta = 0.5;
  p.s = 2.0;
  p.mu = 2.0;
  const auto syn = potential_synapses(p);
  constexpr std::size_t runs = 10'000;
  std::vector<double> open(syn.size(), 0.0);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto flags = synapse_snapshot(p, 3.0 / p.mu, derive_trial_seed(22, r));
    for (std::size_t e = 0; e < syn.size(); ++e) open[e] += flags[e];
  }
  double stat = 0.0;
  double dof = 0.0;
  for (std::size_t e = 0; e < syn.size(); ++e) {
    const double q = syn[e].q;
    if (q == 0.0 || q == 1.0) {
      CHECK(open[e] == q * runs);
      continue;
    }
    const double expected = q * runs;
    stat += (open[e] - expected) * (open[e] - expected) / (expected * (1.0 - q));
    dof += 1.0;
  }
  CHECK(chi_square_sf(stat, dof) > 0.001);
}

TEST_CASE("spikes happen only at refresh instants") {
  NeuralParams p;
  p.N = 3;
  p.p_nn = 0.5;
  p.beta = 0.6;
  p.s = 1.5;
  p.t_max = 30.0;
  const auto log = simulate_neural(p, 7, NeuralOptions{true});
  CHECK(log.refresh_times.size() == log.refreshes);
  CHECK(std::is_sorted(log.refresh_times.begin(), log.refresh_times.end()));
  std::size_t spikes = 0;
  for (int i = -p.N; i <= p.N; ++i) {
    const auto& s = log.spikes_at(i);
    CHECK(std::adjacent_find(s.begin(), s.end(), std::greater_equal<>()) == s.end());
    for (double t : s) {
      ++spikes;
      CHECK((t == 0.0 || std::binary_search(log.refresh_times.begin(), log.refresh_times.end(), t)));
    }
  }
  CHECK(spikes > 10);
}

TEST_CASE("the spike log agrees with the synapse graph at fixed times") {
  NeuralParams p;
  p.N = 3;
  p.p_nn = 0.5;
  p.beta = 0.6;
  p.s = 1.5;
  p.t_max = 12.0;
  const auto syn = oracle_synapses(p);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto log = simulate_neural(p, seed);
    for (double t : {0.0, 0.7, 2.3, 5.9, 11.1}) {
      const auto flags = synapse_snapshot(p, t, seed);
      for (int i = -p.N; i <= p.N; ++i) {
        CHECK(log_says_joined(log, i, t) ==
              neuron_joined(p, syn, flags, static_cast<std::size_t>(i + p.N)));
      }
    }
  }
}

TEST_CASE("connected time equals the integral rebuilt from the log") {
  NeuralParams p;
  p.N = 4;
  p.p_nn = 0.45;
  p.beta = 0.4;
  p.t_max = 25.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto log = simulate_neural(p, seed);
    for (int i = -p.N; i <= p.N; ++i) {
      CHECK(connected_time_between(log, i, 0.0, p.t_max) ==
            log.connected_time[static_cast<std::size_t>(i + p.N)]);
    }
    CHECK(connected_time_between(log, 0, 0.0, 5.0) + connected_time_between(log, 0, 5.0, p.t_max) ==
          doctest::Approx(log.connected_time[static_cast<std::size_t>(p.N)]).epsilon(1e-12));
  }
}

TEST_CASE("identical seeds give identical logs") {
  NeuralParams p;
  p.N = 6;
  p.p_nn = 0.4;
  p.beta = 0.5;
  const auto a = simulate_neural(p, 99);
  const auto b = simulate_neural(p, 99);
  CHECK(a.spikes == b.spikes);
  CHECK(a.disconnects == b.disconnects);
  CHECK(a.connected_time == b.connected_time);
  CHECK(a.refreshes == b.refreshes);
  CHECK(simulate_neural(p, 100).spikes != a.spikes);
}

TEST_CASE("interarrival summaries") {
  NeuralParams p;
  p.N = 2;
  p.p_nn = 0.0;
  const auto none = interarrival_stats(simulate_neural(p, 1), 0);
  CHECK(none.count == 0);
  CHECK(none.gaps.empty());
  p.p_nn = 1.0;
  const auto one = interarrival_stats(simulate_neural(p, 1), 1);
  CHECK(one.count == 1);
  CHECK(one.gaps.empty());
  CHECK_THROWS_AS(interarrival_stats(simulate_neural(p, 1), 3), ConfigError);
}

TEST_CASE("phase scan: full nearest-neighbor links keep neuron 0 active") {
  PhaseScanConfig cfg;
  cfg.betas = {0.0, 1.0};
  cfg.exponents = {1.5, 2.0, 3.0};
  cfg.p_nn = 1.0;
  cfg.N = 8;
  cfg.trials = 5;
  const auto map = phase_scan(cfg);
  for (const auto& cell : map.cells) {
    CHECK(cell.activity.mean == 1.0);
    CHECK(cell.nontrivial);
    CHECK(cell.finite_size_caveat == (cell.s == 2.0));
  }
}

TEST_CASE("phase scan: activity is monotone in beta and p_nn") {
  PhaseScanConfig cfg;
  cfg.betas = {0.0, 0.5, 1.0, 2.0};
  cfg.exponents = {1.5};
  cfg.N = 6;
  cfg.p_nn = 0.3;
  cfg.trials = 200;
  const auto map = phase_scan(cfg);
  for (std::size_t b = 0; b + 1 < cfg.betas.size(); ++b) {
    const auto& lo = map.at(b, 0).activity;
    const auto& hi = map.at(b + 1, 0).activity;
    CHECK(hi.mean >= lo.mean - 2.0 * std::hypot(lo.ci, hi.ci));
  }
  std::vector<Estimate> by_pnn;
  for (double p_nn : {0.1, 0.4, 0.8}) {
    cfg.betas = {0.5};
    cfg.p_nn = p_nn;
    by_pnn.push_back(phase_scan(cfg).cells[0].activity);
  }
  for (std::size_t k = 0; k + 1 < by_pnn.size(); ++k) {
    CHECK(by_pnn[k + 1].mean >= by_pnn[k].mean - 2.0 * std::hypot(by_pnn[k].ci, by_pnn[k + 1].ci));
  }
}

TEST_CASE("phase scan: nearest-neighbor chains die out with N, long-range links do not") {
  PhaseScanConfig cfg;
  cfg.betas = {0.0, 1.0};
  cfg.exponents = {1.5};
  cfg.p_nn = 0.2;
  cfg.trials = 20;
  cfg.N = 50;
  const auto small = phase_scan(cfg);
  cfg.N = 200;
  const auto large = phase_scan(cfg);
  const auto& a = small.at(0, 0).activity;
  const auto& b = large.at(0, 0).activity;
  CHECK(b.mean <= a.mean + 2.0 * std::hypot(a.ci, b.ci));
  const auto& chain = large.at(0, 0).activity;
  const auto& longrange = large.at(1, 0).activity;
  CHECK(longrange.mean - chain.mean > 2.0 * std::hypot(chain.ci, longrange.ci));
}

TEST_CASE("phase scan rows are reproducible from per-trial values") {
  PhaseScanConfig cfg;
  cfg.N = 4;
  cfg.trials = 6;
  cfg.workers = 3;
  const auto map = phase_scan(cfg);
  std::vector<double> values;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    const auto row = phase_trial(cfg, i);
    values.insert(values.end(), row.begin(), row.end());
  }
  const auto again = phase_map_from_values(cfg, values);
  for (std::size_t c = 0; c < map.cells.size(); ++c) {
    CHECK(map.cells[c].activity.mean == again.cells[c].activity.mean);
    CHECK(map.cells[c].activity.ci == again.cells[c].activity.ci);
  }
  std::ostringstream csv;
  write_phase_csv(csv, map);
  CHECK(csv.str().rfind("beta,s=1.5,s=2,s=3\n", 0) == 0);
  std::ostringstream js;
  write_phase_json(js, map);
  CHECK(nlohmann::json::parse(js.str())["cells"].size() == 9);
  PhaseScanConfig empty;
  empty.betas.clear();
  CHECK_THROWS_AS(phase_scan(empty), ConfigError);
}

TEST_CASE("static connectivity probability") {
  NeuralParams p;
  p.N = 3;
  p.p_nn = 0.0;
  p.beta = 0.0;
  CHECK(connectivity_probability(p, 100, 1).probability == 0.0);
  p.p_nn = 1.0;
  CHECK(connectivity_probability(p, 100, 1).probability == 1.0);
}

TEST_CASE("N = 1 connectivity: enumeration against sampling") {
  NeuralParams p;
  p.N = 1;
  p.p_nn = 0.5;
  p.beta = 0.5;
  p.s = 2.0;
  const auto syn = oracle_synapses(p);
  REQUIRE(syn.size() == 9);
  const auto lib = connectivity_probability(p, 1000, 1);
  CHECK(lib.exact);

  double exact = 0.0;
  for (std::uint32_t mask = 0; mask < (1U << syn.size()); ++mask) {
    std::vector<std::uint8_t> open(syn.size());
    double w = 1.0;
    for (std::size_t e = 0; e < syn.size(); ++e) {
      open[e] = (mask >> e) & 1U;
      w *= open[e] ? syn[e].q : 1.0 - syn[e].q;
    }
    if (neuron_joined(p, syn, open, 1)) exact += w;
  }
  CHECK(lib.probability == doctest::Approx(exact).epsilon(1e-12));

  constexpr std::size_t trials = 20'000;
  Rng rng(31);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<std::uint8_t> open(syn.size());
    for (std::size_t e = 0; e < syn.size(); ++e) open[e] = rng.uniform() < syn[e].q;
    hits += neuron_joined(p, syn, open, 1);
  }
  const double freq = static_cast<double>(hits) / trials;
  CHECK(std::abs(freq - exact) < 3.0 * std::sqrt(exact * (1.0 - exact) / trials));
}

TEST_CASE("spike export") {
  NeuralParams p;
  p.N = 1;
  p.p_nn = 1.0;
  std::ostringstream out;
  write_spikes_jsonl(out, simulate_neural(p, 1));
  CHECK(out.str() == "{\"neuron\":-1,\"t\":0.0}\n{\"neuron\":0,\"t\":0.0}\n{\"neuron\":1,\"t\":0.0}\n");
}

}
