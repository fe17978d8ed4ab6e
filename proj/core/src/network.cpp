#include "stochlab/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "stochlab/parallel.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

ResistorNetwork::ResistorNetwork(std::size_t vertex_count, std::vector<Edge> edges,
                                 std::size_t origin)
    : edges_(std::move(edges)), origin_(origin) {
  if (vertex_count == 0) throw ConfigError("resistor network needs at least one vertex");
  if (origin >= vertex_count) throw ConfigError("network origin out of range");
  offsets_.assign(vertex_count + 1, 0);
  degree_.assign(vertex_count, 0.0);
  for (const auto& e : edges_) {
    if (e.u >= vertex_count || e.v >= vertex_count) throw ConfigError("edge endpoint out of range");
    if (e.u == e.v) throw ConfigError("self-loops are not allowed");
    if (!(e.conductance > 0.0) || !std::isfinite(e.conductance)) {
      throw ConfigError("conductances must be finite and > 0");
    }
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
    degree_[e.u] += e.conductance;
    degree_[e.v] += e.conductance;
  }
  for (std::size_t v = 0; v < vertex_count; ++v) offsets_[v + 1] += offsets_[v];
  incidence_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    incidence_[fill[e.u]++] = {e.v, e.conductance};
    incidence_[fill[e.v]++] = {e.u, e.conductance};
  }

  distance_.assign(vertex_count, -1);
  std::deque<std::uint32_t> queue{static_cast<std::uint32_t>(origin)};
  distance_[origin] = 0;
  while (!queue.empty()) {
    const auto x = queue.front();
    queue.pop_front();
    for (const auto& inc : incident(x)) {
      if (distance_[inc.neighbor] < 0) {
        distance_[inc.neighbor] = distance_[x] + 1;
        queue.push_back(inc.neighbor);
      }
    }
  }
}

std::vector<std::uint32_t> ResistorNetwork::boundary_at(int radius) const {
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < distance_.size(); ++v) {
    if (distance_[v] == radius) out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

void ResistorNetwork::set_lattice_vertices(std::vector<std::uint32_t> ids) {
  if (!ids.empty() && ids.size() != vertex_count()) {
    throw ConfigError("lattice vertex map size mismatch");
  }
  lattice_vertex_ = std::move(ids);
}

ResistorNetwork network_from_sample(const PercolationSample& sample, std::size_t origin) {
  const Lattice& lat = sample.lattice();
  if (origin >= lat.vertex_count()) throw ConfigError("origin outside the window");
  if (sample.open_degree(origin) == 0) {
    throw IsolatedOrigin("origin " + std::to_string(origin) + " has no open incident edge");
  }
  std::vector<std::int32_t> local(lat.vertex_count(), -1);
  std::vector<std::uint32_t> order{static_cast<std::uint32_t>(origin)};
  local[origin] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    lat.for_each_neighbor(order[head], [&](std::size_t w, std::size_t e) {
      if (sample.edge_open(e) && local[w] < 0) {
        local[w] = static_cast<std::int32_t>(order.size());
        order.push_back(static_cast<std::uint32_t>(w));
      }
    });
  }
  std::vector<ResistorNetwork::Edge> edges;
  const auto lattice_edges = lat.edges();
  for (auto v : order) {
    lat.for_each_neighbor(v, [&](std::size_t w, std::size_t e) {
      if (sample.edge_open(e) && lattice_edges[e].u == v) {
        edges.push_back({static_cast<std::uint32_t>(local[v]), static_cast<std::uint32_t>(local[w]), 1.0});
      }
    });
  }
  ResistorNetwork net(order.size(), std::move(edges), 0);
  net.set_lattice_vertices(std::move(order));
  return net;
}

namespace {

// Subnetwork induced by `keep`; `local` receives the old -> new index map.
ResistorNetwork induced(const ResistorNetwork& network, const std::vector<std::uint8_t>& keep,
                        std::vector<std::int32_t>& local) {
  local.assign(network.vertex_count(), -1);
  std::vector<std::uint32_t> lattice_ids;
  const auto lattice_map = network.lattice_vertices();
  std::int32_t next = 0;
  for (std::size_t v = 0; v < network.vertex_count(); ++v) {
    if (!keep[v]) continue;
    local[v] = next++;
    if (!lattice_map.empty()) lattice_ids.push_back(lattice_map[v]);
  }
  std::vector<ResistorNetwork::Edge> edges;
  for (const auto& e : network.edges()) {
    if (keep[e.u] && keep[e.v]) {
      edges.push_back({static_cast<std::uint32_t>(local[e.u]), static_cast<std::uint32_t>(local[e.v]),
                       e.conductance});
    }
  }
  const auto origin = local[network.origin()] >= 0 ? static_cast<std::size_t>(local[network.origin()]) : 0;
  ResistorNetwork sub(static_cast<std::size_t>(next), std::move(edges), origin);
  sub.set_lattice_vertices(std::move(lattice_ids));
  return sub;
}

std::vector<std::uint8_t> component_of(const ResistorNetwork& network, std::size_t start) {
  std::vector<std::uint8_t> seen(network.vertex_count(), 0);
  std::vector<std::uint32_t> stack{static_cast<std::uint32_t>(start)};
  seen[start] = 1;
  while (!stack.empty()) {
    const auto x = stack.back();
    stack.pop_back();
    for (const auto& inc : network.incident(x)) {
      if (!seen[inc.neighbor]) {
        seen[inc.neighbor] = 1;
        stack.push_back(inc.neighbor);
      }
    }
  }
  return seen;
}

double harmonic_residual(const ResistorNetwork& network, const std::vector<double>& voltage,
                         const std::vector<std::uint8_t>& is_boundary) {
  double worst = 0.0;
  for (std::size_t x = 0; x < network.vertex_count(); ++x) {
    if (is_boundary[x] || network.degree(x) == 0.0) continue;
    double weighted = 0.0;
    for (const auto& inc : network.incident(x)) weighted += inc.conductance * voltage[inc.neighbor];
    worst = std::max(worst, std::abs(voltage[x] - weighted / network.degree(x)));
  }
  return worst;
}

}  // namespace

ResistorNetwork ball(const ResistorNetwork& network, int radius) {
  std::vector<std::uint8_t> keep(network.vertex_count(), 0);
  const auto dist = network.distances();
  for (std::size_t v = 0; v < keep.size(); ++v) keep[v] = dist[v] >= 0 && dist[v] <= radius;
  std::vector<std::int32_t> local;
  return induced(network, keep, local);
}

VoltageSolution solve_dirichlet(const ResistorNetwork& network,
                                std::span<const BoundaryValue> boundary, double tolerance) {
  if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be > 0");
  if (boundary.empty()) throw ConfigError("Dirichlet problem needs a nonempty boundary");
  const std::size_t n = network.vertex_count();

  VoltageSolution sol;
  sol.voltage.assign(n, 0.0);
  sol.is_boundary.assign(n, 0);
  sol.boundary.assign(boundary.begin(), boundary.end());
  double scale = 0.0;
  for (const auto& b : boundary) {
    if (b.vertex >= n) throw ConfigError("boundary vertex out of range");
    if (!std::isfinite(b.value)) throw ConfigError("boundary values must be finite");
    if (sol.is_boundary[b.vertex]) throw ConfigError("boundary vertex listed twice");
    sol.is_boundary[b.vertex] = 1;
    sol.voltage[b.vertex] = b.value;
    scale = std::max(scale, std::abs(b.value));
  }
  const double target = tolerance * (scale > 0.0 ? scale : 1.0);

  // Every free vertex must see the boundary.
  {
    std::vector<std::uint8_t> reached(sol.is_boundary);
    std::vector<std::uint32_t> stack;
    for (const auto& b : boundary) stack.push_back(b.vertex);
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (const auto& inc : network.incident(x)) {
        if (!reached[inc.neighbor]) {
          reached[inc.neighbor] = 1;
          stack.push_back(inc.neighbor);
        }
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      if (!reached[v]) {
        throw SolverError("vertex " + std::to_string(v) + " lies in a component with no boundary");
      }
    }
  }

  std::vector<std::uint32_t> free_vertices;
  std::vector<std::int32_t> slot(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (!sol.is_boundary[v]) {
      slot[v] = static_cast<std::int32_t>(free_vertices.size());
      free_vertices.push_back(static_cast<std::uint32_t>(v));
    }
  }
  const std::size_t m = free_vertices.size();

  if (m > 0) {
    // Reduced system A x = b with A = D - W on the free vertices.
    std::vector<double> rhs(m, 0.0);
    std::vector<double> diag(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto x = free_vertices[i];
      diag[i] = network.degree(x);
      for (const auto& inc : network.incident(x)) {
        if (sol.is_boundary[inc.neighbor]) rhs[i] += inc.conductance * sol.voltage[inc.neighbor];
      }
    }
    auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = diag[i] * in[i];
        for (const auto& inc : network.incident(free_vertices[i])) {
          const auto j = slot[inc.neighbor];
          if (j >= 0) acc -= inc.conductance * in[static_cast<std::size_t>(j)];
        }
        out[i] = acc;
      }
    };
    auto scaled_max = [&](const std::vector<double>& r) {
      double worst = 0.0;
      for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(r[i]) / diag[i]);
      return worst;
    };

    std::vector<double> x(m, 0.0);
    std::vector<double> r(m);
    std::vector<double> z(m);
    std::vector<double> p(m);
    std::vector<double> ap(m);
    const int max_iterations = static_cast<int>(20 * m + 200);
    int it = 0;
    bool converged = false;
    // Outer loop restarts from the true residual if recursion drift fooled the test.
    while (!converged && it < max_iterations) {
      apply(x, ap);
      for (std::size_t i = 0; i < m; ++i) r[i] = rhs[i] - ap[i];
      if (scaled_max(r) <= target) {
        converged = true;
        break;
      }
      for (std::size_t i = 0; i < m; ++i) p[i] = z[i] = r[i] / diag[i];
      double rz = 0.0;
      for (std::size_t i = 0; i < m; ++i) rz += r[i] * z[i];
      while (it < max_iterations) {
        ++it;
        apply(p, ap);
        double pap = 0.0;
        for (std::size_t i = 0; i < m; ++i) pap += p[i] * ap[i];
        if (!(pap > 0.0)) break;
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < m; ++i) {
          x[i] += alpha * p[i];
          r[i] -= alpha * ap[i];
        }
        if (scaled_max(r) <= target) break;
        double rz_next = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          z[i] = r[i] / diag[i];
          rz_next += r[i] * z[i];
        }
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
      }
    }
    for (std::size_t i = 0; i < m; ++i) sol.voltage[free_vertices[i]] = x[i];
    sol.iterations = it;
    if (!converged) {
      sol.residual = harmonic_residual(network, sol.voltage, sol.is_boundary);
      if (!(sol.residual <= target)) {
        throw SolverError("conjugate gradients did not reach the tolerance in " +
                          std::to_string(it) + " iterations");
      }
    }
  }

  sol.residual = harmonic_residual(network, sol.voltage, sol.is_boundary);
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& b : boundary) top = std::max(top, b.value);
  CompensatedSum source;
  sol.boundary_current.reserve(boundary.size());
  for (const auto& b : boundary) {
    CompensatedSum out;
    for (const auto& inc : network.incident(b.vertex)) {
      out.add(inc.conductance * (b.value - sol.voltage[inc.neighbor]));
    }
    sol.boundary_current.push_back(out.value());
    if (b.value == top) source.add(out.value());
  }
  sol.source_current = source.value();
  return sol;
}

ResistanceResult effective_resistance(const ResistorNetwork& network, std::size_t a,
                                      std::span<const std::uint32_t> targets, double tolerance) {
  const std::size_t n = network.vertex_count();
  if (a >= n) throw ConfigError("source vertex out of range");
  if (targets.empty()) throw ConfigError("target set must be nonempty");
  for (auto b : targets) {
    if (b >= n) throw ConfigError("target vertex out of range");
    if (b == a) throw ConfigError("source vertex lies in the target set");
  }

  ResistanceResult result;
  const auto component = component_of(network, a);
  std::vector<std::uint32_t> reachable;
  for (auto b : targets) {
    if (component[b]) reachable.push_back(b);
  }
  std::sort(reachable.begin(), reachable.end());
  reachable.erase(std::unique(reachable.begin(), reachable.end()), reachable.end());
  if (reachable.empty()) {
    result.disconnected = true;
    return result;
  }

  std::vector<std::int32_t> local;
  const auto sub = induced(network, component, local);
  std::vector<BoundaryValue> boundary{{static_cast<std::uint32_t>(local[a]), 1.0}};
  for (auto b : reachable) boundary.push_back({static_cast<std::uint32_t>(local[b]), 0.0});
  const auto sol = solve_dirichlet(sub, boundary, tolerance);

  result.current = sol.boundary_current.front();
  // Stored as the reciprocal of the reported resistance so the two agree exactly.
  result.resistance = 1.0 / result.current;
  result.conductance = 1.0 / result.resistance;
  CompensatedSum energy;
  for (const auto& e : sub.edges()) {
    const double dv = sol.voltage[e.u] - sol.voltage[e.v];
    energy.add(e.conductance * dv * dv);
  }
  result.energy = energy.value();
  result.residual = sol.residual;
  result.iterations = sol.iterations;
  return result;
}

EscapeResult escape_probability(const ResistorNetwork& network, int radius, double tolerance) {
  if (radius < 1) throw ConfigError("escape radius must be >= 1");
  EscapeResult out;
  const auto local = ball(network, radius);
  const auto boundary = local.boundary_at(radius);
  if (boundary.empty()) {
    out.disconnected = true;
    return out;
  }
  const auto r = effective_resistance(local, local.origin(), boundary, tolerance);
  out.conductance = r.conductance;
  out.resistance = r.resistance;
  out.disconnected = r.disconnected;
  out.probability = r.conductance / network.degree(network.origin());
  return out;
}

ClusterWalk walk_on_cluster(const ResistorNetwork& network, const StopRule& stop,
                            std::uint64_t seed, bool record_path) {
  const auto origin = static_cast<std::uint32_t>(network.origin());
  if (network.incident(origin).empty()) throw IsolatedOrigin("walk origin has no open edge");
  Rng rng(stream_seed(seed, StreamKind::cluster_walk));
  const auto dist = network.distances();
  ClusterWalk walk;
  std::uint32_t at = origin;
  if (record_path) walk.path.push_back(at);
  while (walk.steps < stop.step_cap) {
    const auto inc = network.incident(at);
    at = inc[rng.below(inc.size())].neighbor;
    ++walk.steps;
    if (record_path) walk.path.push_back(at);
    if (stop.radius > 0 && dist[at] == stop.radius) {
      walk.reason = StopReason::boundary;
      break;
    }
    if (stop.stop_on_return && at == origin) {
      walk.reason = StopReason::returned;
      break;
    }
  }
  walk.end_vertex = at;
  return walk;
}

ClusterWalk walk_on_cluster(const PercolationSample& sample, std::size_t origin,
                            const StopRule& stop, std::uint64_t seed, bool record_path) {
  return walk_on_cluster(network_from_sample(sample, origin), stop, seed, record_path);
}

BinomialEstimate escape_frequency(const ResistorNetwork& network, int radius, std::size_t walks,
                                  std::uint64_t master_seed, unsigned workers) {
  if (radius < 1) throw ConfigError("escape radius must be >= 1");
  std::vector<std::uint8_t> escaped(walks);
  const StopRule rule{radius, true, std::numeric_limits<std::uint64_t>::max()};
  parallel_for(walks, workers, [&](std::size_t i) {
    escaped[i] = walk_on_cluster(network, rule, derive_trial_seed(master_seed, i)).reason ==
                 StopReason::boundary;
  });
  return binomial_estimate(
      static_cast<std::size_t>(std::count(escaped.begin(), escaped.end(), 1)), walks);
}

double boundary_volume_ratio(const ClusterLabeling& labeling, const Lattice& window,
                             std::size_t origin, WindowEdgePolicy policy) {
  if (origin >= labeling.cluster_of.size() || labeling.cluster_of.size() != window.vertex_count()) {
    throw ConfigError("labeling does not match the window");
  }
  const auto c = labeling.cluster_of[origin];
  if (c == kClosedSite) throw ConfigError("origin is not in any cluster");
  std::size_t volume = 0;
  std::size_t surface = 0;
  for (std::size_t v = 0; v < window.vertex_count(); ++v) {
    if (labeling.cluster_of[v] != c) continue;
    ++volume;
    if (window.on_window_edge(v)) {
      surface += policy == WindowEdgePolicy::exterior;
      continue;
    }
    bool exposed = false;
    window.for_each_neighbor(v, [&](std::size_t w, std::size_t) {
      exposed = exposed || labeling.cluster_of[w] != c;
    });
    surface += exposed;
  }
  return static_cast<double>(surface) / static_cast<double>(volume);
}

// ---------------------------------------------------------------------------

namespace {

double critical_bond_p(int dimension) { return dimension == 2 ? 0.5 : 0.2488; }

}  // namespace

void validate(const ScalingConfig& config) {
  if (config.dimension != 2 && config.dimension != 3) {
    throw ConfigError("resistance scaling runs in dimension 2 or 3");
  }
  if (!(config.p > critical_bond_p(config.dimension) && config.p <= 1.0)) {
    throw ConfigError("resistance scaling needs supercritical p (above " +
                      format_double(critical_bond_p(config.dimension)) + ") and p <= 1");
  }
  if (config.radii.empty()) throw ConfigError("radii must be nonempty");
  for (std::size_t i = 0; i < config.radii.size(); ++i) {
    if (config.radii[i] < 1 || (i > 0 && config.radii[i] <= config.radii[i - 1])) {
      throw ConfigError("radii must be positive and strictly increasing");
    }
  }
  if (config.max_attempts_per_trial < 1) throw ConfigError("max_attempts_per_trial must be >= 1");
}

ScalingTrial scaling_trial(const ScalingConfig& config, const LatticePtr& window, std::size_t i) {
  const std::size_t origin = window->center();
  const std::uint64_t trial_seed = derive_trial_seed(config.master_seed, i);
  ScalingTrial out;
  for (std::size_t attempt = 0; attempt < config.max_attempts_per_trial; ++attempt) {
    ++out.attempts;
    const auto sample = sample_percolation(window, PercolationMode::bond, config.p,
                                           stream_seed(trial_seed, StreamKind::resample, attempt));
    const auto labels = label_clusters(sample);
    if (labels.cluster_of[origin] != labels.largest ||
        labels.sizes[static_cast<std::size_t>(labels.largest)] < 2) {
      continue;
    }
    const auto network = network_from_sample(sample, origin);
    for (int radius : config.radii) {
      const auto esc = escape_probability(network, radius, config.tolerance);
      out.resistance.push_back(esc.disconnected ? kInfiniteResistance : esc.resistance);
      out.escape.push_back(esc.probability);
    }
    out.ratio = boundary_volume_ratio(labels, *window, origin, WindowEdgePolicy::exclude);
    return out;
  }
  throw DiagnosticError("trial " + std::to_string(i) + ": origin never landed in the largest " +
                        "cluster within " + std::to_string(config.max_attempts_per_trial) +
                        " samples");
}

LatticePtr scaling_window(const ScalingConfig& config) {
  validate(config);
  return make_lattice(config.dimension, 2 * config.radii.back() + 1, Boundary::open);
}

ScalingTable tabulate_scaling(const ScalingConfig& config, std::span<const ScalingTrial> trials) {
  const std::size_t k = config.radii.size();
  ScalingTable table;
  table.dimension = config.dimension;
  table.p = config.p;
  std::vector<double> ratios;
  for (const auto& t : trials) {
    table.resamples += t.attempts - 1;
    ratios.push_back(t.ratio);
  }
  table.boundary_volume = mean_ci(ratios);
  for (std::size_t j = 0; j < k; ++j) {
    ScalingRow row;
    row.radius = config.radii[j];
    row.trials = trials.size();
    std::vector<double> finite;
    std::vector<double> escape;
    for (const auto& t : trials) {
      escape.push_back(t.escape[j]);
      if (std::isfinite(t.resistance[j])) {
        finite.push_back(t.resistance[j]);
      } else {
        ++row.censored;
      }
    }
    row.resistance = mean_ci(finite);
    row.escape = mean_ci(escape);
    table.rows.push_back(row);
  }

  std::vector<double> x;
  std::vector<double> y;
  for (const auto& row : table.rows) {
    if (row.resistance.count == 0) continue;
    x.push_back(config.dimension == 2 ? std::log(static_cast<double>(row.radius))
                                      : 1.0 / static_cast<double>(row.radius));
    y.push_back(row.resistance.mean);
  }
  for (std::size_t j = 1; j < y.size(); ++j) table.fit.increments.push_back(y[j] - y[j - 1]);
  if (x.size() >= 2) {
    const auto line = fit_line(x, y);
    table.fit.r_squared = line.r_squared;
    table.fit.residuals = line.residuals;
    table.fit.a = line.intercept;
    if (config.dimension == 2) {
      table.fit.model = GrowthModel::logarithmic;
      table.fit.b = line.slope;
    } else {
      table.fit.model = GrowthModel::bounded;
      table.fit.b = -line.slope;
    }
  }
  return table;
}

ScalingTable resistance_scaling_experiment(const ScalingConfig& config) {
  const auto window = scaling_window(config);
  if (config.trials < 1) throw ConfigError("resistance scaling needs trials >= 1");
  std::vector<ScalingTrial> trials(config.trials);
  parallel_for(config.trials, config.workers,
               [&](std::size_t i) { trials[i] = scaling_trial(config, window, i); });
  return tabulate_scaling(config, trials);
}

void write_scaling_csv(std::ostream& out, const ScalingTable& table) {
  out << "n,mean_R,ci_R,mean_pesc,ci_pesc,trials,censored\n";
  for (const auto& row : table.rows) {
    out << row.radius << ',' << format_double(row.resistance.mean) << ','
        << format_double(row.resistance.ci) << ',' << format_double(row.escape.mean) << ','
        << format_double(row.escape.ci) << ',' << row.trials << ',' << row.censored << '\n';
  }
}

void write_solver_json(std::ostream& out, const VoltageSolution& solution) {
  nlohmann::ordered_json j;
  j["vertices"] = solution.voltage.size();
  j["boundary_vertices"] = solution.boundary.size();
  j["iterations"] = solution.iterations;
  j["residual"] = solution.residual;
  j["source_current"] = solution.source_current;
  out << j.dump() << '\n';
}

}  // namespace stochlab
