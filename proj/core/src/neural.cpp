#include "stochlab/neural.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "stochlab/lattice.hpp"
#include "stochlab/parallel.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

void validate(const NeuralParams& params) {
  if (params.N < 0) throw ConfigError("N must be >= 0");
  if (params.N > 5000) throw ConfigError("N too large for the pairwise synapse set");
  if (!(params.p_nn >= 0.0 && params.p_nn <= 1.0)) throw ConfigError("p_nn must lie in [0, 1]");
  if (!(params.beta >= 0.0) || !std::isfinite(params.beta)) {
    throw ConfigError("beta must be finite and >= 0");
  }
  if (!(params.s > 0.0) || !std::isfinite(params.s)) throw ConfigError("s must be > 0");
  if (!(params.mu > 0.0) || !std::isfinite(params.mu)) throw ConfigError("mu must be > 0");
  if (!(params.t_max > 0.0) || !std::isfinite(params.t_max)) {
    throw ConfigError("t_max must be finite and > 0");
  }
}

std::vector<Synapse> potential_synapses(const NeuralParams& params) {
  validate(params);
  const auto neurons = static_cast<std::uint32_t>(2 * params.N + 1);
  const std::uint32_t left = neurons;
  const std::uint32_t right = neurons + 1;
  std::vector<Synapse> out;
  out.reserve(static_cast<std::size_t>(neurons) * (neurons - 1) / 2 + 2 * neurons);
  for (std::uint32_t a = 0; a < neurons; ++a) {
    for (std::uint32_t b = a + 1; b < neurons; ++b) {
      out.push_back({a, b, long_range_probability(b - a, params.p_nn, params.beta, params.s)});
    }
  }
  for (std::uint32_t a = 0; a < neurons; ++a) {
    out.push_back({a, left, long_range_probability(a + 1, params.p_nn, params.beta, params.s)});
    out.push_back(
        {a, right, long_range_probability(neurons - a, params.p_nn, params.beta, params.s)});
  }
  return out;
}

namespace {

// The dynamic synapse environment plus source connectivity of every neuron.
class Environment {
 public:
  Environment(const NeuralParams& params, std::uint64_t seed)
      : synapses_(potential_synapses(params)),
        neurons_(static_cast<std::size_t>(2 * params.N + 1)),
        rate_(params.mu * static_cast<double>(synapses_.size())),
        rng_(stream_seed(seed, StreamKind::neural)),
        flags_(synapses_.size(), 0),
        slot_(synapses_.size(), -1),
        dsu_(neurons_ + 2),
        joined_(neurons_, 0) {
    for (std::size_t e = 0; e < synapses_.size(); ++e) {
      if (rng_.uniform() < synapses_[e].q) open(e);
    }
    rebuild();
  }

  std::span<const std::uint8_t> flags() const noexcept { return flags_; }
  std::span<const std::uint8_t> joined() const noexcept { return joined_; }

  // Advances to the next refresh before `t_stop`. Returns false once the next
  // refresh would land at or after t_stop; `changed` reports a flag flip.
  bool step(double t_stop, double& t, bool& changed) {
    changed = false;
    const double next = t + rng_.exponential(rate_);
    if (next >= t_stop) return false;
    t = next;
    const auto e = static_cast<std::size_t>(rng_.below(synapses_.size()));
    const bool now_open = rng_.uniform() < synapses_[e].q;
    if (now_open == static_cast<bool>(flags_[e])) return true;
    changed = true;
    if (now_open) {
      open(e);
      if (dsu_.unite(synapses_[e].a, synapses_[e].b)) refresh_joined();
    } else {
      close(e);
      rebuild();
    }
    return true;
  }

 private:
  void open(std::size_t e) {
    flags_[e] = 1;
    slot_[e] = static_cast<std::int32_t>(open_.size());
    open_.push_back(static_cast<std::uint32_t>(e));
  }

  void close(std::size_t e) {
    flags_[e] = 0;
    const auto i = static_cast<std::size_t>(slot_[e]);
    const auto moved = open_.back();
    open_[i] = moved;
    slot_[moved] = static_cast<std::int32_t>(i);
    open_.pop_back();
    slot_[e] = -1;
  }

  void rebuild() {
    dsu_ = DisjointSet(neurons_ + 2);
    for (auto e : open_) dsu_.unite(synapses_[e].a, synapses_[e].b);
    refresh_joined();
  }

  void refresh_joined() {
    const auto left = dsu_.find(neurons_);
    const auto right = dsu_.find(neurons_ + 1);
    for (std::size_t k = 0; k < neurons_; ++k) {
      const auto r = dsu_.find(k);
      joined_[k] = r == left || r == right;
    }
  }

  std::vector<Synapse> synapses_;
  std::size_t neurons_;
  double rate_;
  Rng rng_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::int32_t> slot_;
  std::vector<std::uint32_t> open_;
  DisjointSet dsu_;
  std::vector<std::uint8_t> joined_;
};

}  // namespace

SpikeLog simulate_neural(const NeuralParams& params, std::uint64_t seed,
                         const NeuralOptions& options) {
  validate(params);
  Environment env(params, seed);
  const std::size_t neurons = static_cast<std::size_t>(2 * params.N + 1);
  SpikeLog log;
  log.N = params.N;
  log.t_max = params.t_max;
  log.spikes.resize(neurons);
  log.disconnects.resize(neurons);
  log.connected_time.assign(neurons, 0.0);
  std::vector<std::uint8_t> state(neurons, 0);
  std::vector<double> since(neurons, 0.0);

  auto observe = [&](double t) {
    const auto joined = env.joined();
    for (std::size_t k = 0; k < neurons; ++k) {
      if (joined[k] == state[k]) continue;
      if (joined[k]) {
        log.spikes[k].push_back(t);
        since[k] = t;
      } else {
        log.disconnects[k].push_back(t);
        log.connected_time[k] += t - since[k];
      }
      state[k] = joined[k];
    }
  };

  observe(0.0);
  double t = 0.0;
  bool changed = false;
  while (env.step(params.t_max, t, changed)) {
    ++log.refreshes;
    if (options.record_refresh_times) log.refresh_times.push_back(t);
    if (changed) observe(t);
  }
  for (std::size_t k = 0; k < neurons; ++k) {
    if (state[k]) log.connected_time[k] += params.t_max - since[k];
  }
  return log;
}

std::vector<std::uint8_t> synapse_snapshot(const NeuralParams& params, double t,
                                           std::uint64_t seed) {
  validate(params);
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("snapshot time must be finite and >= 0");
  Environment env(params, seed);
  double now = 0.0;
  bool changed = false;
  while (env.step(t, now, changed)) {
  }
  const auto f = env.flags();
  return {f.begin(), f.end()};
}

double connected_time_between(const SpikeLog& log, int site, double from, double to) {
  if (site < -log.N || site > log.N) throw ConfigError("neuron site outside [-N, N]");
  const auto k = static_cast<std::size_t>(site + log.N);
  const auto& on = log.spikes[k];
  const auto& off = log.disconnects[k];
  double total = 0.0;
  for (std::size_t j = 0; j < on.size(); ++j) {
    const double end = j < off.size() ? off[j] : log.t_max;
    const double a = std::max(on[j], from);
    const double b = std::min(end, to);
    if (b > a) total += b - a;
  }
  return total;
}

InterarrivalSummary interarrival_stats(const SpikeLog& log, int site) {
  if (site < -log.N || site > log.N) throw ConfigError("neuron site outside [-N, N]");
  const auto& spikes = log.spikes[static_cast<std::size_t>(site + log.N)];
  InterarrivalSummary out;
  out.count = spikes.size();
  for (std::size_t j = 1; j < spikes.size(); ++j) out.gaps.push_back(spikes[j] - spikes[j - 1]);
  if (out.gaps.empty()) return out;
  out.mean = mean_ci(out.gaps).mean;
  out.median = quantile(out.gaps, 0.5);
  out.q10 = quantile(out.gaps, 0.1);
  out.q25 = quantile(out.gaps, 0.25);
  out.q75 = quantile(out.gaps, 0.75);
  out.q90 = quantile(out.gaps, 0.9);
  return out;
}

double activity(const SpikeLog& log) {
  const double half = 0.5 * log.t_max;
  return connected_time_between(log, 0, half, log.t_max) / half;
}

void validate(const PhaseScanConfig& config) {
  if (config.betas.empty() || config.exponents.empty()) {
    throw ConfigError("phase scan grid must be nonempty");
  }
  for (double beta : config.betas) {
    for (double s : config.exponents) {
      validate(NeuralParams{config.N, config.p_nn, beta, s, config.mu, config.t_max});
    }
  }
}

std::vector<double> phase_trial(const PhaseScanConfig& config, std::size_t trial) {
  const std::uint64_t seed = derive_trial_seed(config.master_seed, trial);
  std::vector<double> out;
  out.reserve(config.betas.size() * config.exponents.size());
  for (double beta : config.betas) {
    for (double s : config.exponents) {
      out.push_back(
          activity(simulate_neural({config.N, config.p_nn, beta, s, config.mu, config.t_max}, seed)));
    }
  }
  return out;
}

PhaseMap phase_map_from_values(const PhaseScanConfig& config, std::span<const double> values) {
  const std::size_t cells = config.betas.size() * config.exponents.size();
  if (cells == 0 || values.size() % cells != 0) {
    throw ConfigError("phase values do not fill whole trial rows");
  }
  const std::size_t trials = values.size() / cells;
  PhaseMap map;
  map.config = config;
  std::vector<double> column(trials);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t i = 0; i < trials; ++i) column[i] = values[i * cells + c];
    PhaseCell cell;
    cell.beta = config.betas[c / config.exponents.size()];
    cell.s = config.exponents[c % config.exponents.size()];
    cell.activity = mean_ci(column);
    cell.nontrivial = cell.activity.mean > config.activity_threshold;
    cell.finite_size_caveat = cell.s == 2.0;
    map.cells.push_back(cell);
  }
  return map;
}

PhaseMap phase_scan(const PhaseScanConfig& config) {
  validate(config);
  if (config.trials < 1) throw ConfigError("phase scan needs trials >= 1");
  const std::size_t cells = config.betas.size() * config.exponents.size();
  std::vector<double> values(cells * config.trials);
  parallel_for(config.trials, config.workers, [&](std::size_t i) {
    const auto row = phase_trial(config, i);
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(i * cells));
  });
  return phase_map_from_values(config, values);
}

namespace {

bool origin_joined(const std::vector<Synapse>& synapses, std::size_t vertices, std::size_t origin,
                   const auto& is_open) {
  DisjointSet dsu(vertices);
  for (std::size_t e = 0; e < synapses.size(); ++e) {
    if (is_open(e)) dsu.unite(synapses[e].a, synapses[e].b);
  }
  const auto r = dsu.find(origin);
  return r == dsu.find(vertices - 2) || r == dsu.find(vertices - 1);
}

}  // namespace

ConnectivityEstimate connectivity_probability(const NeuralParams& params, std::size_t trials,
                                              std::uint64_t master_seed) {
  const auto synapses = potential_synapses(params);
  const std::size_t vertices = static_cast<std::size_t>(2 * params.N + 3);
  const auto origin = static_cast<std::size_t>(params.N);
  ConnectivityEstimate out;
  if (synapses.size() <= 20) {
    out.exact = true;
    CompensatedSum total;
    const std::uint32_t subsets = 1U << synapses.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
      double weight = 1.0;
      for (std::size_t e = 0; e < synapses.size() && weight > 0.0; ++e) {
        weight *= (mask >> e) & 1U ? synapses[e].q : 1.0 - synapses[e].q;
      }
      if (weight == 0.0) continue;
      if (origin_joined(synapses, vertices, origin, [&](std::size_t e) { return (mask >> e) & 1U; })) {
        total.add(weight);
      }
    }
    out.probability = total.value();
    return out;
  }
  if (trials < 1) throw ConfigError("connectivity_probability needs trials >= 1");
  std::size_t hits = 0;
  std::vector<std::uint8_t> flags(synapses.size());
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng(stream_seed(derive_trial_seed(master_seed, i), StreamKind::neural, 1));
    for (std::size_t e = 0; e < synapses.size(); ++e) flags[e] = rng.uniform() < synapses[e].q;
    hits += origin_joined(synapses, vertices, origin, [&](std::size_t e) { return flags[e] != 0; });
  }
  const auto b = binomial_estimate(hits, trials);
  out.probability = b.fraction;
  out.ci = b.ci;
  out.trials = trials;
  return out;
}

void write_spikes_jsonl(std::ostream& out, const SpikeLog& log) {
  std::vector<std::pair<double, int>> all;
  for (std::size_t k = 0; k < log.spikes.size(); ++k) {
    for (double t : log.spikes[k]) all.emplace_back(t, static_cast<int>(k) - log.N);
  }
  std::sort(all.begin(), all.end());
  for (const auto& [t, site] : all) {
    nlohmann::ordered_json j;
    j["neuron"] = site;
    j["t"] = t;
    out << j.dump() << '\n';
  }
}

void write_phase_csv(std::ostream& out, const PhaseMap& map, bool ci) {
  out << "beta";
  for (double s : map.config.exponents) out << ",s=" << format_double(s);
  out << '\n';
  for (std::size_t b = 0; b < map.config.betas.size(); ++b) {
    out << format_double(map.config.betas[b]);
    for (std::size_t s = 0; s < map.config.exponents.size(); ++s) {
      const auto& cell = map.at(b, s);
      out << ',' << format_double(ci ? cell.activity.ci : cell.activity.mean);
    }
    out << '\n';
  }
}

void write_phase_json(std::ostream& out, const PhaseMap& map) {
  nlohmann::ordered_json j;
  j["N"] = map.config.N;
  j["p_nn"] = map.config.p_nn;
  j["mu"] = map.config.mu;
  j["t_max"] = map.config.t_max;
  j["trials"] = map.config.trials;
  j["master_seed"] = map.config.master_seed;
  j["betas"] = map.config.betas;
  j["exponents"] = map.config.exponents;
  j["activity_threshold"] = map.config.activity_threshold;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : map.cells) {
    nlohmann::ordered_json c;
    c["beta"] = cell.beta;
    c["s"] = cell.s;
    c["activity"] = cell.activity.mean;
    c["ci"] = cell.activity.ci;
    c["nontrivial"] = cell.nontrivial;
    c["finite_size_caveat"] = cell.finite_size_caveat;
    cells.push_back(c);
  }
  out << j.dump(2) << '\n';
}

}  // namespace stochlab
