#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "stochlab/errors.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

enum class Boundary : std::uint8_t { open, periodic };
enum class PercolationMode : std::uint8_t { bond, site };

std::string_view to_string(Boundary b);
std::string_view to_string(PercolationMode m);
Boundary parse_boundary(std::string_view s);
PercolationMode parse_mode(std::string_view s);

inline constexpr std::int32_t kNoVertex = -1;

// Hypercubic window {0..L-1}^d, row-major (axis 0 slowest). Direction slot
// 2a is +e_a and 2a+1 is -e_a; with open boundary a slot may be empty.
class Lattice {
 public:
  struct Edge {
    std::uint32_t u;
    std::uint32_t v;
  };

  Lattice(int dimension, int side, Boundary boundary);

  int dimension() const noexcept { return dimension_; }
  int side() const noexcept { return side_; }
  Boundary boundary() const noexcept { return boundary_; }
  int directions() const noexcept { return 2 * dimension_; }

  std::size_t vertex_count() const noexcept { return vertex_count_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }

  // Neighbor in direction slot `dir`, or kNoVertex off an open boundary.
  std::int32_t neighbor(std::size_t v, int dir) const noexcept {
    return neighbors_[v * static_cast<std::size_t>(directions()) + static_cast<std::size_t>(dir)];
  }
  // Edge id joining v to neighbor(v, dir), or kNoVertex.
  std::int32_t edge_at(std::size_t v, int dir) const noexcept {
    return edge_ids_[v * static_cast<std::size_t>(directions()) + static_cast<std::size_t>(dir)];
  }

  template <class F>
  void for_each_neighbor(std::size_t v, F&& f) const {
    for (int dir = 0; dir < directions(); ++dir) {
      const auto w = neighbor(v, dir);
      if (w != kNoVertex) f(static_cast<std::size_t>(w), static_cast<std::size_t>(edge_at(v, dir)));
    }
  }

  std::array<int, 3> coordinates(std::size_t v) const noexcept;
  std::size_t index(std::span<const int> coords) const;
  int coordinate(std::size_t v, int axis) const noexcept;

  // The vertex with every coordinate L/2.
  std::size_t center() const noexcept;
  bool on_window_edge(std::size_t v) const noexcept;

 private:
  int dimension_;
  int side_;
  Boundary boundary_;
  std::size_t vertex_count_;
  std::array<std::size_t, 3> stride_{};
  std::vector<Edge> edges_;
  std::vector<std::int32_t> neighbors_;
  std::vector<std::int32_t> edge_ids_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

// Throws ConfigError unless d in {1,2,3}, L >= 2, and L >= 3 when periodic.
Lattice build_lattice(int dimension, int side, Boundary boundary);
LatticePtr make_lattice(int dimension, int side, Boundary boundary);

class PercolationSample {
 public:
  PercolationSample(LatticePtr lattice, PercolationMode mode, double p, std::uint64_t seed,
                    std::vector<std::uint8_t> flags);

  const Lattice& lattice() const noexcept { return *lattice_; }
  const LatticePtr& lattice_ptr() const noexcept { return lattice_; }
  PercolationMode mode() const noexcept { return mode_; }
  double p() const noexcept { return p_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const std::uint8_t> flags() const noexcept { return flags_; }

  bool site_open(std::size_t v) const noexcept {
    return mode_ == PercolationMode::bond || flags_[v] != 0;
  }
  bool edge_open(std::size_t e) const noexcept {
    if (mode_ == PercolationMode::bond) return flags_[e] != 0;
    const auto& edge = lattice_->edges()[e];
    return flags_[edge.u] != 0 && flags_[edge.v] != 0;
  }
  std::size_t open_flag_count() const noexcept;
  std::size_t open_degree(std::size_t v) const noexcept;

 private:
  LatticePtr lattice_;
  PercolationMode mode_;
  double p_;
  std::uint64_t seed_;
  std::vector<std::uint8_t> flags_;
};

// Flag i is open iff a keyed uniform for (seed, mode, i) falls below p.
// Throws ConfigError for p outside [0, 1].
PercolationSample sample_percolation(LatticePtr lattice, PercolationMode mode, double p,
                                     std::uint64_t seed);

// Union by size with path halving.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n);
  std::size_t find(std::size_t x) noexcept;
  bool unite(std::size_t a, std::size_t b) noexcept;
  std::size_t size_of(std::size_t x) noexcept { return size_[find(x)]; }
  std::size_t element_count() const noexcept { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

inline constexpr std::int32_t kClosedSite = -1;

struct ClusterLabeling {
  // Cluster ids are numbered by the smallest vertex they contain.
  std::vector<std::int32_t> cluster_of;
  std::vector<std::size_t> sizes;
  std::int32_t largest = kClosedSite;  // ties go to the lower id
  std::vector<bool> spans;               // per axis
  std::size_t open_vertices = 0;

  std::size_t cluster_count() const noexcept { return sizes.size(); }
};

ClusterLabeling label_clusters(const PercolationSample& sample);

// Throws ConfigError for axis >= d.
bool spanning_present(const ClusterLabeling& labeling, int axis);

// Spanning indicator across axis 0 over independent samples; trial i uses
// derive_trial_seed(master_seed, i).
BinomialEstimate estimate_spanning_probability(int dimension, int side, PercolationMode mode,
                                               double p, std::size_t trials,
                                               std::uint64_t master_seed,
                                               unsigned workers = 1);

// P(edge between sites at distance `distance`): p_nn at 1, else
// min(1, beta * distance^-s).
double long_range_probability(std::size_t distance, double p_nn, double beta, double s);

struct LongRangeGraph {
  std::size_t sites = 0;
  double p_nn = 0.0;
  double beta = 0.0;
  double s = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // i < j, lexicographic
};

LongRangeGraph sample_long_range_graph(std::size_t sites, double p_nn, double beta, double s,
                                       std::uint64_t seed);
double expected_long_range_edges(std::size_t sites, double p_nn, double beta, double s);

// Text archive: a header line with d, L, boundary, mode, p, seed and the flag
// count, followed by hex-packed flags (bit k of digit j is flag 4j + k).
void write_sample(std::ostream& out, const PercolationSample& sample);
PercolationSample read_sample(std::istream& in);

}  // namespace stochlab
