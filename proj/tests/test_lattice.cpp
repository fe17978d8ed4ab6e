#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "stochlab/lattice.hpp"
#include "stochlab/rng.hpp"

using namespace stochlab;

namespace {

PercolationSample with_flags(const LatticePtr& lattice, PercolationMode mode,
                             std::vector<std::uint8_t> flags) {
  return PercolationSample(lattice, mode, 0.5, 0, std::move(flags));
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("edge counts") {
  CHECK(build_lattice(1, 5, Boundary::open).edge_count() == 4);
  CHECK(build_lattice(1, 5, Boundary::open).vertex_count() == 5);
  CHECK(build_lattice(2, 3, Boundary::open).edge_count() == 12);
  CHECK(build_lattice(2, 3, Boundary::periodic).edge_count() == 18);
  for (int d = 1; d <= 3; ++d) {
    for (int L : {3, 4, 7}) {
      const auto open = build_lattice(d, L, Boundary::open);
      const auto periodic = build_lattice(d, L, Boundary::periodic);
      const std::size_t Ld = static_cast<std::size_t>(std::pow(L, d));
      CHECK(open.vertex_count() == Ld);
      CHECK(open.edge_count() == static_cast<std::size_t>(d) * (Ld / L) * (L - 1));
      CHECK(periodic.edge_count() == static_cast<std::size_t>(d) * Ld);
    }
  }
}

TEST_CASE("neighbors are consistent with edges") {
  const auto lat = build_lattice(3, 4, Boundary::periodic);
  for (std::size_t v = 0; v < lat.vertex_count(); ++v) {
    lat.for_each_neighbor(v, [&](std::size_t w, std::size_t e) {
      const auto& edge = lat.edges()[e];
      CHECK(((edge.u == v && edge.v == w) || (edge.v == v && edge.u == w)));
    });
    CHECK(lat.index(std::array<int, 3>{lat.coordinate(v, 0), lat.coordinate(v, 1),
                                       lat.coordinate(v, 2)}) == v);
  }
}

TEST_CASE("invalid lattices are configuration errors") {
  CHECK_THROWS_AS(build_lattice(0, 5, Boundary::open), ConfigError);
  CHECK_THROWS_AS(build_lattice(4, 5, Boundary::open), ConfigError);
  CHECK_THROWS_AS(build_lattice(2, 1, Boundary::open), ConfigError);
  CHECK_THROWS_AS(build_lattice(2, 2, Boundary::periodic), ConfigError);
}

TEST_CASE("sampling extremes, range errors and determinism") {
  const auto lat = make_lattice(2, 8, Boundary::open);
  CHECK(sample_percolation(lat, PercolationMode::bond, 0.0, 1).open_flag_count() == 0);
  CHECK(sample_percolation(lat, PercolationMode::bond, 1.0, 1).open_flag_count() ==
        lat->edge_count());
  CHECK(sample_percolation(lat, PercolationMode::site, 1.0, 1).open_flag_count() ==
        lat->vertex_count());
  CHECK_THROWS_AS(sample_percolation(lat, PercolationMode::bond, 1.5, 1), ConfigError);
  CHECK_THROWS_AS(sample_percolation(lat, PercolationMode::bond, -0.1, 1), ConfigError);
  const auto a = sample_percolation(lat, PercolationMode::bond, 0.4, 17);
  const auto b = sample_percolation(lat, PercolationMode::bond, 0.4, 17);
  CHECK(std::equal(a.flags().begin(), a.flags().end(), b.flags().begin(), b.flags().end()));
}

TEST_CASE("open fraction on a 64x64 bond window is binomial") {
  const auto lat = make_lattice(2, 64, Boundary::open);
  REQUIRE(lat->edge_count() == 8064);
  const auto s = sample_percolation(lat, PercolationMode::bond, 0.5, 2024);
  const double frac = static_cast<double>(s.open_flag_count()) / 8064.0;
  CHECK(std::abs(frac - 0.5) <= 3.0 * std::sqrt(0.25 / 8064.0));
}

TEST_CASE("samples at different p are nested under one seed") {
  const auto lat = make_lattice(2, 16, Boundary::open);
  const auto lo = sample_percolation(lat, PercolationMode::bond, 0.3, 5);
  const auto hi = sample_percolation(lat, PercolationMode::bond, 0.6, 5);
  for (std::size_t e = 0; e < lat->edge_count(); ++e) CHECK(lo.flags()[e] <= hi.flags()[e]);
}

TEST_CASE("labeling examples") {
  const auto lat = make_lattice(2, 4, Boundary::open);
  const auto full = label_clusters(sample_percolation(lat, PercolationMode::bond, 1.0, 0));
  CHECK(full.cluster_count() == 1);
  CHECK(full.sizes[0] == 16);
  const auto none = label_clusters(sample_percolation(lat, PercolationMode::bond, 0.0, 0));
  CHECK(none.cluster_count() == 16);
  CHECK(none.open_vertices == 16);

  // 2x2: vertices 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1); open only the two edges
  // along axis 1, i.e. 0-1 and 2-3.
  const auto small = make_lattice(2, 2, Boundary::open);
  std::vector<std::uint8_t> flags(small->edge_count(), 0);
  for (std::size_t e = 0; e < small->edge_count(); ++e) {
    const auto& edge = small->edges()[e];
    if (small->coordinate(edge.u, 0) == small->coordinate(edge.v, 0)) flags[e] = 1;
  }
  const auto sample = with_flags(small, PercolationMode::bond, flags);
  const auto labels = label_clusters(sample);
  CHECK(labels.cluster_count() == 2);
  CHECK(labels.sizes == std::vector<std::size_t>{2, 2});
  CHECK(oracle::canonical_partition(labels) == oracle::bfs_partition(sample));
}

TEST_CASE("labeling invariants against the BFS oracle") {
  const auto lat = make_lattice(2, 8, Boundary::open);
  for (auto mode : {PercolationMode::bond, PercolationMode::site}) {
    for (double p : {0.3, 0.5, 0.7}) {
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto sample = sample_percolation(lat, mode, p, derive_trial_seed(11, seed));
        const auto labels = label_clusters(sample);
        REQUIRE(oracle::canonical_partition(labels) == oracle::bfs_partition(sample));
        std::size_t total = 0;
        for (auto s : labels.sizes) total += s;
        CHECK(total == labels.open_vertices);
        if (labels.largest != kClosedSite) {
          for (auto s : labels.sizes) CHECK(s <= labels.sizes[static_cast<std::size_t>(labels.largest)]);
        }
      }
    }
  }
}

TEST_CASE("site-mode closed vertices carry the sentinel") {
  const auto lat = make_lattice(2, 5, Boundary::open);
  const auto sample = sample_percolation(lat, PercolationMode::site, 0.5, 3);
  const auto labels = label_clusters(sample);
  for (std::size_t v = 0; v < lat->vertex_count(); ++v) {
    CHECK((labels.cluster_of[v] == kClosedSite) == (sample.flags()[v] == 0));
  }
}

TEST_CASE("spanning examples") {
  const auto lat = make_lattice(2, 6, Boundary::open);
  CHECK(spanning_present(label_clusters(sample_percolation(lat, PercolationMode::bond, 1.0, 0)), 0));
  CHECK_FALSE(spanning_present(label_clusters(sample_percolation(lat, PercolationMode::bond, 0.0, 0)), 0));
  // A straight open column along axis 0 at coordinate 1 = 2.
  std::vector<std::uint8_t> flags(lat->edge_count(), 0);
  for (std::size_t e = 0; e < lat->edge_count(); ++e) {
    const auto& edge = lat->edges()[e];
    if (lat->coordinate(edge.u, 1) == 2 && lat->coordinate(edge.v, 1) == 2) flags[e] = 1;
  }
  const auto path = with_flags(lat, PercolationMode::bond, flags);
  const auto labels = label_clusters(path);
  CHECK(spanning_present(labels, 0));
  CHECK_FALSE(spanning_present(labels, 1));
  // Oracle: one BFS cluster touching both axis-0 faces.
  const auto rep = oracle::bfs_partition(path);
  bool oracle_spans = false;
  for (std::size_t a = 0; a < rep.size(); ++a) {
    for (std::size_t b = 0; b < rep.size(); ++b) {
      if (lat->coordinate(a, 0) == 0 && lat->coordinate(b, 0) == 5 && rep[a] == rep[b]) {
        oracle_spans = true;
      }
    }
  }
  CHECK(oracle_spans);
  CHECK_THROWS_AS(spanning_present(labels, 2), ConfigError);
}

TEST_CASE("spanning probability extremes and the supercritical side") {
  CHECK(estimate_spanning_probability(2, 16, PercolationMode::bond, 0.0, 20, 1).fraction == 0.0);
  CHECK(estimate_spanning_probability(2, 16, PercolationMode::bond, 1.0, 20, 1).fraction == 1.0);
  CHECK(estimate_spanning_probability(2, 128, PercolationMode::bond, 0.55, 200, 7).fraction > 0.8);
}

TEST_CASE("long-range graph examples") {
  const auto chain = sample_long_range_graph(10, 1.0, 0.0, 2.0, 1);
  CHECK(chain.edges.size() == 9);
  for (auto [i, j] : chain.edges) CHECK(j == i + 1);
  CHECK(sample_long_range_graph(10, 0.0, 0.0, 2.0, 1).edges.empty());
  CHECK(expected_long_range_edges(4, 0.5, 0.5, 2.0) == doctest::Approx(1.80556).epsilon(1e-5));
  CHECK_THROWS_AS(sample_long_range_graph(1, 0.5, 0.5, 2.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_long_range_graph(5, 1.5, 0.5, 2.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_long_range_graph(5, 0.5, -1.0, 2.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_long_range_graph(5, 0.5, 0.5, 0.0, 1), ConfigError);
  CHECK(long_range_probability(2, 0.1, 10.0, 1.0) == 1.0);
}

TEST_CASE("long-range edge count and per-pair laws") {
  constexpr int trials = 10'000;
  const double q[4] = {0.0, 0.5, 0.5 / 4.0, 0.5 / 9.0};
  double mean = 0.0;
  double variance = 0.0;
  for (int d = 1; d <= 3; ++d) {
    mean += (4 - d) * q[d];
    variance += (4 - d) * q[d] * (1.0 - q[d]);
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> hits;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto g = sample_long_range_graph(4, 0.5, 0.5, 2.0, derive_trial_seed(3, t));
    total += static_cast<double>(g.edges.size());
    for (const auto& e : g.edges) hits[e] += 1.0;
  }
  CHECK(std::abs(total / trials - mean) < 3.0 * std::sqrt(variance / trials));
  const std::pair<std::uint32_t, std::uint32_t> pairs[5] = {{0, 1}, {1, 2}, {0, 2}, {1, 3}, {0, 3}};
  for (const auto& pr : pairs) {
    const double p = q[pr.second - pr.first];
    const std::vector<double> observed{hits[pr], trials - hits[pr]};
    const std::vector<double> expected{trials * p, trials * (1.0 - p)};
    CHECK(chi_square_test(observed, expected).p_value > 0.001);
  }
}

TEST_CASE("sample archive round trip") {
  for (auto mode : {PercolationMode::bond, PercolationMode::site}) {
    const auto lat = make_lattice(3, 5, Boundary::periodic);
    const auto s = sample_percolation(lat, mode, 0.37, 0xabcdef);
    std::stringstream buf;
    write_sample(buf, s);
    const auto back = read_sample(buf);
    CHECK(back.mode() == mode);
    CHECK(back.p() == 0.37);
    CHECK(back.seed() == 0xabcdef);
    CHECK(back.lattice().boundary() == Boundary::periodic);
    CHECK(std::equal(s.flags().begin(), s.flags().end(), back.flags().begin(), back.flags().end()));
  }
  std::stringstream bad("not an archive\n");
  CHECK_THROWS(read_sample(bad));
}

}
