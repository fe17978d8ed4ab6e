#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stochlab/errors.hpp"
#include "stochlab/lattice.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

class IsolatedOrigin : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by solve_dirichlet when some free vertex cannot reach the boundary,
// or when the iteration fails to converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Undirected multigraph of resistors. Parallel edges are allowed and add.
class ResistorNetwork {
 public:
  struct Edge {
    std::uint32_t u;
    std::uint32_t v;
    double conductance = 1.0;
  };
  struct Incidence {
    std::uint32_t neighbor;
    double conductance;
  };

  // Throws ConfigError on out-of-range endpoints, self-loops, or
  // non-positive conductances.
  ResistorNetwork(std::size_t vertex_count, std::vector<Edge> edges, std::size_t origin = 0);

  std::size_t vertex_count() const noexcept { return offsets_.size() - 1; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::size_t origin() const noexcept { return origin_; }

  std::span<const Incidence> incident(std::size_t v) const noexcept {
    return {incidence_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  // Sum of incident conductances (the edge count under unit conductances).
  double degree(std::size_t v) const noexcept { return degree_[v]; }

  // Graph distance from the origin; -1 when unreachable.
  std::span<const std::int32_t> distances() const noexcept { return distance_; }
  std::vector<std::uint32_t> boundary_at(int radius) const;

  // Lattice vertex behind each network vertex (empty unless built from a sample).
  std::span<const std::uint32_t> lattice_vertices() const noexcept { return lattice_vertex_; }
  void set_lattice_vertices(std::vector<std::uint32_t> ids);

 private:
  std::vector<Edge> edges_;
  std::size_t origin_;
  std::vector<std::size_t> offsets_;
  std::vector<Incidence> incidence_;
  std::vector<double> degree_;
  std::vector<std::int32_t> distance_;
  std::vector<std::uint32_t> lattice_vertex_;
};

// Open cluster of `origin` with unit conductance per open edge.
// Throws IsolatedOrigin when origin has no open incident edge.
ResistorNetwork network_from_sample(const PercolationSample& sample, std::size_t origin);

// Induced subnetwork on vertices within graph distance `radius` of the origin.
ResistorNetwork ball(const ResistorNetwork& network, int radius);

struct BoundaryValue {
  std::uint32_t vertex;
  double value;
};

struct VoltageSolution {
  std::vector<double> voltage;
  std::vector<std::uint8_t> is_boundary;
  std::vector<BoundaryValue> boundary;
  // Net current out of each boundary vertex, in `boundary` order.
  std::vector<double> boundary_current;
  // Current leaving the boundary vertices held at the highest value.
  double source_current = 0.0;
  // max over free vertices of |V(x) - conductance-weighted neighbor mean|.
  double residual = 0.0;
  int iterations = 0;
};

// Preconditioned conjugate gradients (Jacobi) on the reduced Laplacian,
// iterating until `residual` <= tolerance * max|boundary value| (or
// tolerance when all boundary values are zero).
VoltageSolution solve_dirichlet(const ResistorNetwork& network,
                                std::span<const BoundaryValue> boundary, double tolerance);

inline constexpr double kInfiniteResistance = std::numeric_limits<double>::infinity();

struct ResistanceResult {
  double resistance = kInfiniteResistance;  // kInfiniteResistance when a cannot reach B
  double conductance = 0.0;
  double current = 0.0;  // out of a with V(a) = 1, V(B) = 0
  double energy = 0.0;   // sum of conductance * (dV)^2
  double residual = 0.0;
  int iterations = 0;
  bool disconnected = false;
};

// Throws ConfigError when a is in B or B is empty.
ResistanceResult effective_resistance(const ResistorNetwork& network, std::size_t a,
                                      std::span<const std::uint32_t> targets,
                                      double tolerance = 1e-10);

struct EscapeResult {
  double probability = 0.0;
  double conductance = 0.0;  // C_eff(origin, boundary at radius)
  double resistance = kInfiniteResistance;
  bool disconnected = false;  // no vertex at the requested radius
};

// Probability that the walk from the origin reaches graph distance `radius`
// before returning: C_eff(origin, boundary) / degree(origin).
EscapeResult escape_probability(const ResistorNetwork& network, int radius,
                                double tolerance = 1e-10);

enum class StopReason : std::uint8_t { boundary, returned, step_cap };

struct StopRule {
  int radius = 0;              // stop on reaching this graph distance (0 disables)
  bool stop_on_return = true;  // stop on revisiting the origin
  std::uint64_t step_cap = 100'000'000;
};

struct ClusterWalk {
  std::uint64_t steps = 0;
  std::uint32_t end_vertex = 0;
  StopReason reason = StopReason::step_cap;
  std::vector<std::uint32_t> path;  // only when requested
};

// Uniform choice over incident edges at every step (the ant in the labyrinth).
ClusterWalk walk_on_cluster(const ResistorNetwork& network, const StopRule& stop,
                            std::uint64_t seed, bool record_path = false);
ClusterWalk walk_on_cluster(const PercolationSample& sample, std::size_t origin,
                            const StopRule& stop, std::uint64_t seed, bool record_path = false);

// Fraction of walks escaping to `radius` before returning.
BinomialEstimate escape_frequency(const ResistorNetwork& network, int radius, std::size_t walks,
                                  std::uint64_t master_seed, unsigned workers = 1);

enum class WindowEdgePolicy : std::uint8_t {
  exclude,   // window-edge sites never count toward the boundary
  exterior,  // window-edge sites always count (outside the window is outside C)
};

// |dC| / |C| for the cluster containing `origin`, where dC holds the sites of
// C with a lattice neighbor outside C. Throws ConfigError for a closed origin.
double boundary_volume_ratio(const ClusterLabeling& labeling, const Lattice& window,
                             std::size_t origin,
                             WindowEdgePolicy policy = WindowEdgePolicy::exclude);

struct ScalingRow {
  int radius = 0;
  Estimate resistance;  // over uncensored trials
  Estimate escape;      // over all trials
  std::size_t trials = 0;
  std::size_t censored = 0;
};

enum class GrowthModel : std::uint8_t { logarithmic, bounded };

struct GrowthFit {
  GrowthModel model = GrowthModel::logarithmic;
  // logarithmic: R = a + b ln n; bounded: R = a - b / n.
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
  std::vector<double> increments;  // R(n_{k+1}) - R(n_k)
};

struct ScalingTable {
  int dimension = 2;
  double p = 1.0;
  std::vector<ScalingRow> rows;
  GrowthFit fit;
  Estimate boundary_volume;  // origin-cluster ratio, window edge excluded
  std::size_t resamples = 0;  // samples drawn beyond one per trial
  bool exploratory = true;
};

struct ScalingConfig {
  int dimension = 2;
  double p = 0.7;
  std::vector<int> radii{4, 8, 16};
  std::size_t trials = 10;
  std::uint64_t master_seed = 1;
  std::size_t max_attempts_per_trial = 200;
  unsigned workers = 1;
  double tolerance = 1e-10;
};

// Throws ConfigError for a bad dimension, subcritical p, or radii that are
// not positive and strictly increasing.
void validate(const ScalingConfig& config);

struct ScalingTrial {
  std::vector<double> resistance;  // per radius; kInfiniteResistance when disconnected
  std::vector<double> escape;
  double ratio = 0.0;
  std::size_t attempts = 0;
};

LatticePtr scaling_window(const ScalingConfig& config);

// Trial i, seeded by derive_trial_seed(master_seed, i); its k-th sample uses
// the resample stream with index k.
ScalingTrial scaling_trial(const ScalingConfig& config, const LatticePtr& window, std::size_t i);
ScalingTable tabulate_scaling(const ScalingConfig& config, std::span<const ScalingTrial> trials);

// Bond percolation on a window of side 2 * max(radii) + 1 centered at the
// origin; each trial resamples until the origin sits in the largest cluster.
// Throws DiagnosticError when a trial exhausts its attempts.
ScalingTable resistance_scaling_experiment(const ScalingConfig& config);

// Columns: n, mean_R, ci_R, mean_pesc, ci_pesc, trials, censored.
void write_scaling_csv(std::ostream& out, const ScalingTable& table);

// Solver diagnostics as one JSON object.
void write_solver_json(std::ostream& out, const VoltageSolution& solution);

}  // namespace stochlab
