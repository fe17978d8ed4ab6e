#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stochlab/lattice.hpp"
#include "stochlab/network.hpp"
#include "stochlab/rng.hpp"

using namespace stochlab;

namespace {

ResistorNetwork path_network(std::uint32_t k) {
  std::vector<ResistorNetwork::Edge> edges;
  for (std::uint32_t i = 0; i < k; ++i) edges.push_back({i, i + 1, 1.0});
  return ResistorNetwork(k + 1, edges, 0);
}

// The full window as a network with lattice vertex ids kept.
ResistorNetwork full_grid(int dimension, int side, std::size_t origin) {
  const auto lat = make_lattice(dimension, side, Boundary::open);
  std::vector<ResistorNetwork::Edge> edges;
  for (const auto& e : lat->edges()) {
    edges.push_back({static_cast<std::uint32_t>(e.u), static_cast<std::uint32_t>(e.v), 1.0});
  }
  return ResistorNetwork(lat->vertex_count(), edges, origin);
}

// Small random connected network: a spanning path plus random chords.
ResistorNetwork random_network(std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::uint32_t>(5 + rng.below(20));
  std::vector<ResistorNetwork::Edge> edges;
  for (std::uint32_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 0.5 + rng.uniform()});
  const auto extra = rng.below(2 * n);
  for (std::uint64_t k = 0; k < extra; ++k) {
    const auto a = static_cast<std::uint32_t>(rng.below(n));
    const auto b = static_cast<std::uint32_t>(rng.below(n));
    if (a != b) edges.push_back({a, b, 0.5 + rng.uniform()});
  }
  return ResistorNetwork(n, edges, 0);
}

void check_solution(const ResistorNetwork& net, const VoltageSolution& sol, double tolerance) {
  double lo = sol.boundary.front().value;
  double hi = lo;
  for (const auto& b : sol.boundary) {
    lo = std::min(lo, b.value);
    hi = std::max(hi, b.value);
    CHECK(sol.voltage[b.vertex] == b.value);
  }
  double worst = 0.0;
  for (std::size_t v = 0; v < net.vertex_count(); ++v) {
    CHECK(sol.voltage[v] >= lo - tolerance);
    CHECK(sol.voltage[v] <= hi + tolerance);
    if (sol.is_boundary[v]) continue;
    double avg = 0.0;
    for (const auto& inc : net.incident(v)) avg += inc.conductance * sol.voltage[inc.neighbor];
    worst = std::max(worst, std::abs(sol.voltage[v] - avg / net.degree(v)));
  }
  CHECK(worst <= 10.0 * tolerance * std::max(1.0, std::max(std::abs(lo), std::abs(hi))));
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("network construction") {
  const auto lat = make_lattice(2, 2, Boundary::open);
  const auto all = network_from_sample(sample_percolation(lat, PercolationMode::bond, 1.0, 1), 0);
  CHECK(all.vertex_count() == 4);
  CHECK(all.edges().size() == 4);
  CHECK(all.degree(0) == 2.0);
  CHECK_THROWS_AS(network_from_sample(sample_percolation(lat, PercolationMode::bond, 0.0, 1), 0),
                  IsolatedOrigin);
  CHECK_THROWS_AS(ResistorNetwork(2, {{0, 0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(ResistorNetwork(2, {{0, 1, 0.0}}), ConfigError);
  CHECK_THROWS_AS(ResistorNetwork(2, {{0, 2, 1.0}}), ConfigError);
}

TEST_CASE("origin cluster network matches the BFS oracle") {
  const auto lat = make_lattice(2, 3, Boundary::open);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto sample = sample_percolation(lat, PercolationMode::bond, 0.5, seed);
    const std::size_t origin = lat->center();
    if (sample.open_degree(origin) == 0) continue;
    ++checked;
    const auto net = network_from_sample(sample, origin);
    const auto rep = oracle::bfs_partition(sample);
    std::set<std::uint32_t> expected;
    for (std::size_t v = 0; v < rep.size(); ++v) {
      if (rep[v] == rep[origin]) expected.insert(static_cast<std::uint32_t>(v));
    }
    const auto ids = net.lattice_vertices();
    CHECK(std::set<std::uint32_t>(ids.begin(), ids.end()) == expected);
    CHECK(ids[net.origin()] == origin);
    std::size_t open_inside = 0;
    for (std::size_t e = 0; e < lat->edge_count(); ++e) {
      open_inside += sample.edge_open(e) && expected.count(static_cast<std::uint32_t>(lat->edges()[e].u));
    }
    CHECK(net.edges().size() == open_inside);
  }
  CHECK(checked > 50);
}

TEST_CASE("Dirichlet examples") {
  const auto path = path_network(2);
  const std::vector<BoundaryValue> ends{{0, 1.0}, {2, 0.0}};
  const auto sol = solve_dirichlet(path, ends, 1e-12);
  CHECK(sol.voltage[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto grid = full_grid(2, 5, 12);
  const std::vector<BoundaryValue> constant{{0, 2.5}, {24, 2.5}};
  const auto flat = solve_dirichlet(grid, constant, 1e-12);
  for (double v : flat.voltage) CHECK(v == doctest::Approx(2.5).epsilon(1e-11));

  CHECK_THROWS_AS(solve_dirichlet(path, std::vector<BoundaryValue>{}, 1e-10), ConfigError);
  CHECK_THROWS_AS(solve_dirichlet(path, ends, 0.0), ConfigError);
}

TEST_CASE("3x3 grid with faces held at 1 and 0 against elimination") {
  const auto lat = make_lattice(2, 3, Boundary::open);
  const auto grid = full_grid(2, 3, 4);
  std::vector<BoundaryValue> faces;
  for (std::size_t v = 0; v < lat->vertex_count(); ++v) {
    if (lat->coordinate(v, 0) == 0) faces.push_back({static_cast<std::uint32_t>(v), 1.0});
    if (lat->coordinate(v, 0) == 2) faces.push_back({static_cast<std::uint32_t>(v), 0.0});
  }
  const auto sol = solve_dirichlet(grid, faces, 1e-12);
  const auto exact = oracle::dense_dirichlet(grid, faces);
  for (std::size_t v = 0; v < exact.size(); ++v) CHECK(std::abs(sol.voltage[v] - exact[v]) < 1e-10);
  check_solution(grid, sol, 1e-12);
}

TEST_CASE("random networks against elimination, with harmonicity and the maximum principle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto net = random_network(seed);
    Rng rng(seed + 1000);
    std::vector<BoundaryValue> bc;
    for (std::uint32_t v = 0; v < net.vertex_count(); ++v) {
      if (v == 0 || rng.uniform() < 0.25) bc.push_back({v, rng.uniform() * 4.0 - 2.0});
    }
    const auto sol = solve_dirichlet(net, bc, 1e-10);
    const auto exact = oracle::dense_dirichlet(net, bc);
    double err = 0.0;
    for (std::size_t v = 0; v < exact.size(); ++v) err = std::max(err, std::abs(sol.voltage[v] - exact[v]));
    CHECK(err < 1e-8);
    check_solution(net, sol, 1e-10);
  }
}

TEST_CASE("free vertices without boundary contact are an error") {
  const ResistorNetwork split(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  CHECK_THROWS_AS(solve_dirichlet(split, std::vector<BoundaryValue>{{0, 1.0}, {1, 0.0}}, 1e-10),
                  SolverError);
}

TEST_CASE("effective resistance laws") {
  for (std::uint32_t k : {1U, 2U, 5U, 17U}) {
    const std::vector<std::uint32_t> end{k};
    CHECK(std::abs(effective_resistance(path_network(k), 0, end).resistance - k) < 1e-10);
  }
  const ResistorNetwork parallel(2, {{0, 1, 1.0}, {0, 1, 1.0}});
  CHECK(std::abs(effective_resistance(parallel, 0, std::vector<std::uint32_t>{1}).resistance - 0.5) < 1e-10);
  // 2x2 grid: vertex 0 and vertex 3 are opposite corners.
  const auto square = full_grid(2, 2, 0);
  CHECK(std::abs(effective_resistance(square, 0, std::vector<std::uint32_t>{3}).resistance - 1.0) < 1e-10);
  CHECK_THROWS_AS(effective_resistance(square, 0, std::vector<std::uint32_t>{0}), ConfigError);
  CHECK_THROWS_AS(effective_resistance(square, 0, std::vector<std::uint32_t>{}), ConfigError);
}

TEST_CASE("disconnected targets give the infinite-resistance value") {
  const ResistorNetwork split(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  const auto r = effective_resistance(split, 0, std::vector<std::uint32_t>{3});
  CHECK(r.disconnected);
  CHECK(r.resistance == kInfiniteResistance);
  CHECK(r.conductance == 0.0);
}

TEST_CASE("resistance against elimination, reciprocity and energy") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = random_network(seed);
    const std::vector<std::uint32_t> targets{static_cast<std::uint32_t>(net.vertex_count() - 1)};
    const auto r = effective_resistance(net, 0, targets);
    CHECK(r.resistance == doctest::Approx(oracle::dense_resistance(net, 0, targets)).epsilon(1e-8));
    CHECK(r.conductance == 1.0 / r.resistance);
    CHECK(std::abs(r.energy - r.current) <= 1e-8 * r.current);
  }
}

TEST_CASE("Rayleigh monotonicity under single edge deletions") {
  Rng pick(77);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = random_network(seed + 500);
    const std::vector<std::uint32_t> targets{static_cast<std::uint32_t>(net.vertex_count() - 1)};
    const double before = effective_resistance(net, 0, targets).resistance;
    std::vector<ResistorNetwork::Edge> edges(net.edges().begin(), net.edges().end());
    edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(pick.below(edges.size())));
    const double after = effective_resistance(ResistorNetwork(net.vertex_count(), edges, 0), 0, targets).resistance;
    CHECK(after >= before * (1.0 - 1e-9));
  }
}

TEST_CASE("escape probability examples") {
  for (int n : {1, 3, 10}) {
    const auto e = escape_probability(path_network(static_cast<std::uint32_t>(n)), n);
    CHECK(e.probability == doctest::Approx(1.0 / n).epsilon(1e-9));
  }
  const auto box = full_grid(2, 33, 16 * 33 + 16);
  double previous = 1.0;
  for (int n : {2, 4, 8, 16}) {
    const double p = escape_probability(box, n).probability;
    CHECK(p <= previous);
    CHECK(p > 0.0);
    previous = p;
  }
  const auto far = escape_probability(path_network(3), 5);
  CHECK(far.disconnected);
  CHECK(far.probability == 0.0);
}

TEST_CASE("escape probability on the full box against the ant") {
  const auto box = full_grid(2, 21, 10 * 21 + 10);
  const double p = escape_probability(box, 10).probability;
  constexpr std::size_t walks = 20'000;
  const auto freq = escape_frequency(box, 10, walks, 9);
  CHECK(std::abs(freq.fraction - p) < 3.0 * std::sqrt(p * (1.0 - p) / walks));
}

TEST_CASE("the ant on the full lattice is a simple random walk") {
  constexpr int radius = 8;
  const auto lat = make_lattice(2, 2 * radius + 1, Boundary::open);
  const auto sample = sample_percolation(lat, PercolationMode::bond, 1.0, 1);
  const StopRule rule{radius, false, 1'000'000};
  std::vector<double> ant;
  std::vector<double> srw;
  for (std::uint64_t i = 0; i < 10'000; ++i) {
    ant.push_back(static_cast<double>(walk_on_cluster(sample, lat->center(), rule, derive_trial_seed(3, i)).steps));
    Rng rng(derive_trial_seed(4, i));
    int x = 0;
    int y = 0;
    std::uint64_t t = 0;
    while (std::abs(x) + std::abs(y) < radius) {
      switch (rng.below(4)) {
        case 0: ++x; break;
        case 1: --x; break;
        case 2: ++y; break;
        default: --y; break;
      }
      ++t;
    }
    srw.push_back(static_cast<double>(t));
  }
  CHECK(ks_two_sample(ant, srw) < 0.03);
}

TEST_CASE("a single open edge forces the first step") {
  const auto net = path_network(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = walk_on_cluster(net, StopRule{3, true, 1000}, seed, true);
    REQUIRE(w.path.size() >= 2);
    CHECK(w.path[0] == 0);
    CHECK(w.path[1] == 1);
    CHECK(w.reason != StopReason::step_cap);
  }
  const auto capped = walk_on_cluster(full_grid(2, 5, 12), StopRule{0, false, 50}, 1);
  CHECK(capped.reason == StopReason::step_cap);
  CHECK(capped.steps == 50);
}

TEST_CASE("boundary to volume ratio") {
  const auto lat = make_lattice(2, 10, Boundary::open);
  const auto full = label_clusters(sample_percolation(lat, PercolationMode::bond, 1.0, 1));
  CHECK(boundary_volume_ratio(full, *lat, lat->center(), WindowEdgePolicy::exterior) == doctest::Approx(0.36));
  CHECK(boundary_volume_ratio(full, *lat, lat->center()) == 0.0);
  const auto empty = label_clusters(sample_percolation(lat, PercolationMode::bond, 0.0, 1));
  CHECK(boundary_volume_ratio(empty, *lat, lat->center()) == 1.0);
  const auto closed = label_clusters(sample_percolation(lat, PercolationMode::site, 0.0, 1));
  CHECK_THROWS_AS(boundary_volume_ratio(closed, *lat, lat->center()), ConfigError);
}

TEST_CASE("boundary to volume ratio is stable in the window size") {
  std::vector<Estimate> at;
  for (int side : {64, 128}) {
    const auto lat = make_lattice(2, side, Boundary::open);
    std::vector<double> ratios;
    for (std::uint64_t i = 0; ratios.size() < 60; ++i) {
      const auto labels = label_clusters(sample_percolation(lat, PercolationMode::bond, 0.7, derive_trial_seed(side, i)));
      if (labels.cluster_of[lat->center()] != labels.largest) continue;
      ratios.push_back(boundary_volume_ratio(labels, *lat, lat->center()));
    }
    at.push_back(mean_ci(ratios));
  }
  CHECK(std::abs(at[0].mean - at[1].mean) < 2.0 * std::hypot(at[0].ci, at[1].ci));
}

TEST_CASE("full-lattice resistance grows like log n in 2D and stays bounded in 3D") {
  ScalingConfig two{2, 1.0, {4, 8, 16, 32}, 1, 1, 200, 1, 1e-10};
  const auto t2 = resistance_scaling_experiment(two);
  CHECK(t2.fit.model == GrowthModel::logarithmic);
  CHECK(t2.fit.b > 0.0);
  CHECK(t2.fit.r_squared > 0.95);
  CHECK(t2.resamples == 0);
  CHECK(t2.exploratory);

  ScalingConfig three{3, 1.0, {4, 8, 16}, 1, 1, 200, 1, 1e-10};
  const auto t3 = resistance_scaling_experiment(three);
  REQUIRE(t3.fit.increments.size() == 2);
  CHECK(t3.fit.increments[0] > 0.0);
  CHECK(t3.fit.increments[1] < t3.fit.increments[0]);

  ScalingConfig diluted{2, 0.7, {4, 8}, 20, 5, 200, 1, 1e-10};
  const auto td = resistance_scaling_experiment(diluted);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(td.rows[k].resistance.mean >= t2.rows[k].resistance.mean);
  }
}

TEST_CASE("scaling configuration errors") {
  ScalingConfig bad;
  bad.p = 0.4;
  CHECK_THROWS_AS(resistance_scaling_experiment(bad), ConfigError);
  bad = ScalingConfig{};
  bad.radii = {8, 4};
  CHECK_THROWS_AS(resistance_scaling_experiment(bad), ConfigError);
  bad = ScalingConfig{};
  bad.dimension = 1;
  CHECK_THROWS_AS(resistance_scaling_experiment(bad), ConfigError);
}

TEST_CASE("scaling trials are independent of the worker count") {
  ScalingConfig cfg{2, 0.7, {4, 8}, 6, 3, 200, 1, 1e-10};
  const auto a = resistance_scaling_experiment(cfg);
  cfg.workers = 4;
  const auto b = resistance_scaling_experiment(cfg);
  std::ostringstream sa;
  std::ostringstream sb;
  write_scaling_csv(sa, a);
  write_scaling_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("n,mean_R,ci_R,mean_pesc,ci_pesc,trials,censored\n", 0) == 0);
}

TEST_CASE("solver diagnostics as JSON") {
  const auto sol = solve_dirichlet(path_network(4), std::vector<BoundaryValue>{{0, 1.0}, {4, 0.0}}, 1e-12);
  std::ostringstream out;
  write_solver_json(out, sol);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j.contains("iterations"));
  CHECK(j.contains("residual"));
}

}
