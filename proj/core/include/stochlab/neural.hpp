#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stochlab/errors.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

// Neurons sit at sites -N..N. Every pair of neurons carries a potential
// synapse, and every neuron carries one synapse to each of two source
// vertices standing just beyond -N and +N (the finite stand-in for
// infinity). A synapse at distance k is open with probability q(k) =
// p_nn for k = 1, min(1, beta * k^-s) otherwise; a neuron at site i sits at
// distance i + N + 1 from the left source and N - i + 1 from the right one.
// Each synapse is refreshed by its own rate-mu clock and is redrawn open
// with probability q on every refresh.
struct NeuralParams {
  int N = 10;
  double p_nn = 0.5;
  double beta = 0.0;
  double s = 2.0;
  double mu = 1.0;
  double t_max = 10.0;
};

void validate(const NeuralParams& params);

struct Synapse {
  std::uint32_t a;  // vertex ids: neuron at site i is i + N; sources are 2N+1 (left), 2N+2 (right)
  std::uint32_t b;
  double q;
};

std::vector<Synapse> potential_synapses(const NeuralParams& params);

// A spike at neuron i is an instant at which "i is joined to a source by
// open synapses" switches from false to true. Being joined at t = 0 counts
// as a spike at time 0.
struct SpikeLog {
  int N = 0;
  double t_max = 0.0;
  std::vector<std::vector<double>> spikes;       // indexed by i + N
  std::vector<std::vector<double>> disconnects;  // true -> false switches
  std::vector<double> connected_time;            // over [0, t_max]
  std::uint64_t refreshes = 0;
  std::vector<double> refresh_times;  // only when recorded

  const std::vector<double>& spikes_at(int site) const { return spikes.at(static_cast<std::size_t>(site + N)); }
};

struct NeuralOptions {
  bool record_refresh_times = false;
};

SpikeLog simulate_neural(const NeuralParams& params, std::uint64_t seed,
                         const NeuralOptions& options = {});

// Synapse flags at time t (in potential_synapses order), from the same
// dynamics simulate_neural runs.
std::vector<std::uint8_t> synapse_snapshot(const NeuralParams& params, double t,
                                           std::uint64_t seed);

// Time neuron `site` spends joined to a source within [from, to],
// reconstructed from the spike and disconnect instants.
double connected_time_between(const SpikeLog& log, int site, double from, double to);

struct InterarrivalSummary {
  std::size_t count = 0;  // spikes
  std::vector<double> gaps;
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double q90 = 0.0;
};

// Throws ConfigError for a site outside [-N, N].
InterarrivalSummary interarrival_stats(const SpikeLog& log, int site);

struct PhaseScanConfig {
  std::vector<double> betas{0.0, 0.5, 1.0};
  std::vector<double> exponents{1.5, 2.0, 3.0};
  double p_nn = 0.2;
  double mu = 1.0;
  int N = 20;
  double t_max = 10.0;
  std::size_t trials = 20;
  std::uint64_t master_seed = 1;
  unsigned workers = 1;
  double activity_threshold = 0.05;
};

struct PhaseCell {
  double beta = 0.0;
  double s = 0.0;
  Estimate activity;
  bool nontrivial = false;
  bool finite_size_caveat = false;  // s == 2
};

struct PhaseMap {
  PhaseScanConfig config;
  std::vector<PhaseCell> cells;  // row-major: beta outer, s inner

  const PhaseCell& at(std::size_t beta_index, std::size_t s_index) const {
    return cells.at(beta_index * config.exponents.size() + s_index);
  }
};

// Activity of a run: the fraction of [t_max/2, t_max] during which neuron 0
// is joined to a source. Trial i reuses one derived seed for every cell.
PhaseMap phase_scan(const PhaseScanConfig& config);

// Throws ConfigError for an empty grid or invalid model parameters.
void validate(const PhaseScanConfig& config);

// Activity of every cell (beta outer) for trial i.
std::vector<double> phase_trial(const PhaseScanConfig& config, std::size_t trial);

// `values` holds trial rows of phase_trial, trial-major.
PhaseMap phase_map_from_values(const PhaseScanConfig& config, std::span<const double> values);

double activity(const SpikeLog& log);

struct ConnectivityEstimate {
  double probability = 0.0;
  double ci = 0.0;
  bool exact = false;
  std::size_t trials = 0;
};

// P(neuron 0 joined to a source) in a single static snapshot. Exhaustive
// enumeration when there are at most 20 potential synapses.
ConnectivityEstimate connectivity_probability(const NeuralParams& params, std::size_t trials,
                                              std::uint64_t master_seed);

// {"neuron": site, "t": time} per line, ordered by time then site.
void write_spikes_jsonl(std::ostream& out, const SpikeLog& log);

// Rows beta, columns s; "mean" or "ci" matrix with a header of s values.
void write_phase_csv(std::ostream& out, const PhaseMap& map, bool ci = false);
void write_phase_json(std::ostream& out, const PhaseMap& map);

}  // namespace stochlab
