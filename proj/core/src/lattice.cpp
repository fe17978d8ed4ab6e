#include "stochlab/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "stochlab/parallel.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

std::string_view to_string(Boundary b) { return b == Boundary::open ? "open" : "periodic"; }

std::string_view to_string(PercolationMode m) { return m == PercolationMode::bond ? "bond" : "site"; }

Boundary parse_boundary(std::string_view s) {
  if (s == "open") return Boundary::open;
  if (s == "periodic") return Boundary::periodic;
  throw ConfigError("unknown boundary mode '" + std::string(s) + "'");
}

PercolationMode parse_mode(std::string_view s) {
  if (s == "bond") return PercolationMode::bond;
  if (s == "site") return PercolationMode::site;
  throw ConfigError("unknown percolation mode '" + std::string(s) + "'");
}

Lattice::Lattice(int dimension, int side, Boundary boundary)
    : dimension_(dimension), side_(side), boundary_(boundary) {
  if (dimension < 1 || dimension > 3) {
    throw ConfigError("lattice dimension must be 1, 2 or 3, got " + std::to_string(dimension));
  }
  if (side < 2) throw ConfigError("lattice side must be >= 2, got " + std::to_string(side));
  if (boundary == Boundary::periodic && side < 3) {
    throw ConfigError("periodic lattice needs side >= 3");
  }
  vertex_count_ = 1;
  for (int a = 0; a < dimension; ++a) vertex_count_ *= static_cast<std::size_t>(side);
  if (vertex_count_ > static_cast<std::size_t>(INT32_MAX / 8)) {
    throw ConfigError("lattice too large");
  }
  std::size_t stride = 1;
  for (int a = dimension - 1; a >= 0; --a) {
    stride_[static_cast<std::size_t>(a)] = stride;
    stride *= static_cast<std::size_t>(side);
  }

  const auto dirs = static_cast<std::size_t>(directions());
  neighbors_.assign(vertex_count_ * dirs, kNoVertex);
  edge_ids_.assign(vertex_count_ * dirs, kNoVertex);
  for (std::size_t v = 0; v < vertex_count_; ++v) {
    for (int a = 0; a < dimension; ++a) {
      const auto st = stride_[static_cast<std::size_t>(a)];
      const int x = coordinate(v, a);
      std::int32_t up = kNoVertex;
      if (x + 1 < side) {
        up = static_cast<std::int32_t>(v + st);
      } else if (boundary == Boundary::periodic) {
        up = static_cast<std::int32_t>(v - static_cast<std::size_t>(side - 1) * st);
      }
      if (up == kNoVertex) continue;
      const auto e = static_cast<std::int32_t>(edges_.size());
      edges_.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(up)});
      const auto w = static_cast<std::size_t>(up);
      neighbors_[v * dirs + 2 * static_cast<std::size_t>(a)] = up;
      edge_ids_[v * dirs + 2 * static_cast<std::size_t>(a)] = e;
      neighbors_[w * dirs + 2 * static_cast<std::size_t>(a) + 1] = static_cast<std::int32_t>(v);
      edge_ids_[w * dirs + 2 * static_cast<std::size_t>(a) + 1] = e;
    }
  }
}

int Lattice::coordinate(std::size_t v, int axis) const noexcept {
  return static_cast<int>((v / stride_[static_cast<std::size_t>(axis)]) %
                          static_cast<std::size_t>(side_));
}

std::array<int, 3> Lattice::coordinates(std::size_t v) const noexcept {
  std::array<int, 3> c{};
  for (int a = 0; a < dimension_; ++a) c[static_cast<std::size_t>(a)] = coordinate(v, a);
  return c;
}

std::size_t Lattice::index(std::span<const int> coords) const {
  if (coords.size() != static_cast<std::size_t>(dimension_)) {
    throw ConfigError("coordinate rank does not match lattice dimension");
  }
  std::size_t v = 0;
  for (int a = 0; a < dimension_; ++a) {
    const int x = coords[static_cast<std::size_t>(a)];
    if (x < 0 || x >= side_) throw ConfigError("coordinate outside window");
    v += static_cast<std::size_t>(x) * stride_[static_cast<std::size_t>(a)];
  }
  return v;
}

std::size_t Lattice::center() const noexcept {
  std::size_t v = 0;
  for (int a = 0; a < dimension_; ++a) {
    v += static_cast<std::size_t>(side_ / 2) * stride_[static_cast<std::size_t>(a)];
  }
  return v;
}

bool Lattice::on_window_edge(std::size_t v) const noexcept {
  for (int a = 0; a < dimension_; ++a) {
    const int x = coordinate(v, a);
    if (x == 0 || x == side_ - 1) return true;
  }
  return false;
}

Lattice build_lattice(int dimension, int side, Boundary boundary) {
  return Lattice(dimension, side, boundary);
}

LatticePtr make_lattice(int dimension, int side, Boundary boundary) {
  return std::make_shared<const Lattice>(dimension, side, boundary);
}

// ---------------------------------------------------------------------------

PercolationSample::PercolationSample(LatticePtr lattice, PercolationMode mode, double p,
                                     std::uint64_t seed, std::vector<std::uint8_t> flags)
    : lattice_(std::move(lattice)), mode_(mode), p_(p), seed_(seed), flags_(std::move(flags)) {
  if (!lattice_) throw ConfigError("percolation sample needs a lattice");
  const std::size_t expected =
      mode_ == PercolationMode::bond ? lattice_->edge_count() : lattice_->vertex_count();
  if (flags_.size() != expected) {
    throw ConfigError("flag array length " + std::to_string(flags_.size()) +
                      " does not match mode (expected " + std::to_string(expected) + ")");
  }
}

std::size_t PercolationSample::open_flag_count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), std::uint8_t{1}));
}

std::size_t PercolationSample::open_degree(std::size_t v) const noexcept {
  if (!site_open(v)) return 0;
  std::size_t deg = 0;
  lattice_->for_each_neighbor(v, [&](std::size_t, std::size_t e) { deg += edge_open(e); });
  return deg;
}

PercolationSample sample_percolation(LatticePtr lattice, PercolationMode mode, double p,
                                     std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("percolation parameter p must lie in [0, 1]");
  if (!lattice) throw ConfigError("percolation sample needs a lattice");
  const std::size_t n =
      mode == PercolationMode::bond ? lattice->edge_count() : lattice->vertex_count();
  const auto kind = mode == PercolationMode::bond ? StreamKind::bond_flag : StreamKind::site_flag;
  const std::uint64_t key = stream_seed(seed, kind);
  std::vector<std::uint8_t> flags(n);
  for (std::size_t i = 0; i < n; ++i) flags[i] = keyed_bernoulli(key, i, p) ? 1 : 0;
  return PercolationSample(std::move(lattice), mode, p, seed, std::move(flags));
}

// ---------------------------------------------------------------------------

DisjointSet::DisjointSet(std::size_t n) : parent_(n), size_(n, 1) {
  for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<std::uint32_t>(i);
}

std::size_t DisjointSet::find(std::size_t x) noexcept {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool DisjointSet::unite(std::size_t a, std::size_t b) noexcept {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = static_cast<std::uint32_t>(a);
  size_[a] += size_[b];
  return true;
}

ClusterLabeling label_clusters(const PercolationSample& sample) {
  const Lattice& lat = sample.lattice();
  const std::size_t n = lat.vertex_count();
  DisjointSet dsu(n);
  const auto edges = lat.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (sample.edge_open(e)) dsu.unite(edges[e].u, edges[e].v);
  }

  ClusterLabeling out;
  out.cluster_of.assign(n, kClosedSite);
  std::vector<std::int32_t> id_of_root(n, kClosedSite);
  for (std::size_t v = 0; v < n; ++v) {
    if (!sample.site_open(v)) continue;
    ++out.open_vertices;
    const std::size_t r = dsu.find(v);
    if (id_of_root[r] == kClosedSite) {
      id_of_root[r] = static_cast<std::int32_t>(out.sizes.size());
      out.sizes.push_back(0);
    }
    const auto id = id_of_root[r];
    out.cluster_of[v] = id;
    ++out.sizes[static_cast<std::size_t>(id)];
  }
  for (std::size_t c = 0; c < out.sizes.size(); ++c) {
    if (out.largest == kClosedSite || out.sizes[c] > out.sizes[static_cast<std::size_t>(out.largest)]) {
      out.largest = static_cast<std::int32_t>(c);
    }
  }

  const int d = lat.dimension();
  const int last = lat.side() - 1;
  out.spans.assign(static_cast<std::size_t>(d), false);
  std::vector<std::uint8_t> touches(out.sizes.size());
  for (int a = 0; a < d; ++a) {
    std::fill(touches.begin(), touches.end(), std::uint8_t{0});
    for (std::size_t v = 0; v < n; ++v) {
      const auto id = out.cluster_of[v];
      if (id == kClosedSite) continue;
      const int x = lat.coordinate(v, a);
      if (x == 0) touches[static_cast<std::size_t>(id)] |= 1U;
      if (x == last) touches[static_cast<std::size_t>(id)] |= 2U;
    }
    out.spans[static_cast<std::size_t>(a)] =
        std::any_of(touches.begin(), touches.end(), [](std::uint8_t t) { return t == 3U; });
  }
  return out;
}

bool spanning_present(const ClusterLabeling& labeling, int axis) {
  if (axis < 0 || static_cast<std::size_t>(axis) >= labeling.spans.size()) {
    throw ConfigError("spanning axis out of range");
  }
  return labeling.spans[static_cast<std::size_t>(axis)];
}

BinomialEstimate estimate_spanning_probability(int dimension, int side, PercolationMode mode,
                                               double p, std::size_t trials,
                                               std::uint64_t master_seed, unsigned workers) {
  if (trials < 1) throw ConfigError("estimate_spanning_probability needs trials >= 1");
  const auto lattice = make_lattice(dimension, side, Boundary::open);
  std::vector<std::uint8_t> hit(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    const auto sample = sample_percolation(lattice, mode, p, derive_trial_seed(master_seed, i));
    hit[i] = spanning_present(label_clusters(sample), 0) ? 1 : 0;
  });
  const auto successes = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  return binomial_estimate(successes, trials);
}

// ---------------------------------------------------------------------------

double long_range_probability(std::size_t distance, double p_nn, double beta, double s) {
  if (distance == 0) return 0.0;
  if (distance == 1) return p_nn;
  return std::min(1.0, beta * std::pow(static_cast<double>(distance), -s));
}

namespace {

void check_long_range_params(double p_nn, double beta, double s) {
  if (!(p_nn >= 0.0 && p_nn <= 1.0)) throw ConfigError("p_nn must lie in [0, 1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("decay exponent s must be > 0");
}

}  // namespace

LongRangeGraph sample_long_range_graph(std::size_t sites, double p_nn, double beta, double s,
                                       std::uint64_t seed) {
  if (sites < 2) throw ConfigError("long-range graph needs at least two sites");
  check_long_range_params(p_nn, beta, s);
  LongRangeGraph g{sites, p_nn, beta, s, seed, {}};
  const std::uint64_t key = stream_seed(seed, StreamKind::long_range);
  for (std::size_t i = 0; i < sites; ++i) {
    for (std::size_t j = i + 1; j < sites; ++j) {
      const double q = long_range_probability(j - i, p_nn, beta, s);
      if (keyed_bernoulli(key, i * sites + j, q)) {
        g.edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      }
    }
  }
  return g;
}

double expected_long_range_edges(std::size_t sites, double p_nn, double beta, double s) {
  double total = 0.0;
  for (std::size_t d = 1; d < sites; ++d) {
    total += static_cast<double>(sites - d) * long_range_probability(d, p_nn, beta, s);
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kArchiveMagic = "stochlab-percolation";
constexpr std::size_t kHexPerLine = 64;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

void write_sample(std::ostream& out, const PercolationSample& sample) {
  const Lattice& lat = sample.lattice();
  const auto flags = sample.flags();
  out << kArchiveMagic << " 1\n"
      << "d " << lat.dimension() << " L " << lat.side() << " boundary " << to_string(lat.boundary())
      << " mode " << to_string(sample.mode()) << " p " << format_double(sample.p()) << " seed "
      << sample.seed() << " flags " << flags.size() << '\n';
  static constexpr char kDigits[] = "0123456789abcdef";
  std::size_t on_line = 0;
  for (std::size_t i = 0; i < flags.size(); i += 4) {
    unsigned nibble = 0;
    for (std::size_t k = 0; k < 4 && i + k < flags.size(); ++k) {
      nibble |= static_cast<unsigned>(flags[i + k] != 0) << k;
    }
    out << kDigits[nibble];
    if (++on_line == kHexPerLine) {
      out << '\n';
      on_line = 0;
    }
  }
  if (on_line != 0) out << '\n';
}

PercolationSample read_sample(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kArchiveMagic || version != 1) {
    throw ConfigError("not a stochlab percolation archive");
  }
  auto expect = [&](std::string_view key) {
    std::string k;
    if (!(in >> k) || k != key) throw ConfigError("archive header: expected '" + std::string(key) + "'");
  };
  int d = 0;
  int side = 0;
  std::string boundary;
  std::string mode;
  std::string p_text;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  expect("d");
  in >> d;
  expect("L");
  in >> side;
  expect("boundary");
  in >> boundary;
  expect("mode");
  in >> mode;
  expect("p");
  in >> p_text;
  expect("seed");
  in >> seed;
  expect("flags");
  in >> count;
  if (!in) throw ConfigError("archive header truncated");
  double p = 0.0;
  auto [ptr, ec] = std::from_chars(p_text.data(), p_text.data() + p_text.size(), p);
  if (ec != std::errc{} || ptr != p_text.data() + p_text.size()) {
    throw ConfigError("archive header: bad p value '" + p_text + "'");
  }

  auto lattice = make_lattice(d, side, parse_boundary(boundary));
  std::vector<std::uint8_t> flags(count);
  std::size_t i = 0;
  char c = 0;
  while (i < count && in.get(c)) {
    if (c == '\n' || c == '\r' || c == ' ') continue;
    const int v = hex_value(c);
    if (v < 0) throw ConfigError("archive body: invalid hex digit");
    for (std::size_t k = 0; k < 4; ++k) {
      const bool bit = (v >> k) & 1;
      if (i + k < count) {
        flags[i + k] = bit ? 1 : 0;
      } else if (bit) {
        throw ConfigError("archive body: padding bits set");
      }
    }
    i += 4;
  }
  if (i < count) throw ConfigError("archive body truncated");
  return PercolationSample(std::move(lattice), parse_mode(mode), p, seed, std::move(flags));
}

}  // namespace stochlab
