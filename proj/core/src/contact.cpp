#include "stochlab/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "stochlab/parallel.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

namespace {

void check_params(const ContactParams& params) {
  if (!params.window) throw ConfigError("contact process needs a window lattice");
  if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda)) {
    throw ConfigError("infection rate lambda must be finite and >= 0");
  }
}

void check_params(const IdleParams& params) {
  check_params(params.contact);
  if (!(params.gamma >= 0.0) || !std::isfinite(params.gamma)) {
    throw ConfigError("excitation rate gamma must be finite and >= 0");
  }
}

void check_initial(const Lattice& window, const Configuration& initial) {
  if (initial.size() != window.vertex_count()) {
    throw ConfigError("initial configuration size does not match the window");
  }
}

void check_horizon(double t_max) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be finite and > 0");
}

struct NullSink {
  void operator()(double, std::uint32_t, EventKind) const noexcept {}
};

struct LogSink {
  std::vector<ContactEvent>* events;
  void operator()(double t, std::uint32_t site, EventKind kind) const {
    events->push_back({t, site, kind});
  }
};

// Each excited site carries total rate 1 + 2d(lambda + gamma): death at rate
// 1, and for each direction an infection attempt at rate lambda and an
// excitation attempt at rate gamma. Attempts on an unsuitable or off-window
// target change nothing; removing them leaves exactly the contact dynamics.
template <class Sink>
ContactSummary run_engine(const Lattice& lat, double lambda, double gamma, Configuration& state,
                          double t_max, Rng& rng, Sink&& sink) {
  const std::size_t n = lat.vertex_count();
  std::vector<std::uint32_t> occupied;
  std::vector<std::int32_t> slot(n, -1);
  auto add = [&](std::size_t v) {
    slot[v] = static_cast<std::int32_t>(occupied.size());
    occupied.push_back(static_cast<std::uint32_t>(v));
  };
  auto remove = [&](std::size_t v) {
    const auto i = static_cast<std::size_t>(slot[v]);
    const auto moved = occupied.back();
    occupied[i] = moved;
    slot[moved] = static_cast<std::int32_t>(i);
    occupied.pop_back();
    slot[v] = -1;
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (state[v] == SiteState::occupied) add(v);
  }

  const int dirs = lat.directions();
  const double attempt = lambda + gamma;
  const double per_site = 1.0 + dirs * attempt;
  ContactSummary summary;
  double t = 0.0;
  double last_death = 0.0;
  while (!occupied.empty()) {
    t += rng.exponential(per_site * static_cast<double>(occupied.size()));
    if (t >= t_max) break;
    const std::uint32_t x = occupied[rng.below(occupied.size())];
    double u = rng.uniform() * per_site;
    if (u < 1.0) {
      remove(x);
      state[x] = SiteState::vacant;
      last_death = t;
      ++summary.events;
      sink(t, x, EventKind::death);
      continue;
    }
    u -= 1.0;
    const int dir = std::min(static_cast<int>(u / attempt), dirs - 1);
    const double r = u - dir * attempt;
    const auto target = lat.neighbor(x, dir);
    if (target == kNoVertex) continue;
    const auto y = static_cast<std::uint32_t>(target);
    if (r < lambda) {
      if (state[y] != SiteState::vacant) continue;
      state[y] = SiteState::occupied;
      add(y);
      ++summary.events;
      sink(t, y, EventKind::infection);
    } else {
      if (state[y] != SiteState::idle) continue;
      state[y] = SiteState::occupied;
      add(y);
      ++summary.events;
      sink(t, y, EventKind::excitation);
    }
  }
  summary.extinct = occupied.empty();
  summary.extinction_time = summary.extinct ? last_death : 0.0;
  summary.occupied_at_end = occupied.size();
  return summary;
}

ContactTrajectory make_trajectory(const Lattice& lat, double lambda, double gamma,
                                  const Configuration& initial, double t_max,
                                  std::uint64_t seed, StreamKind stream) {
  ContactTrajectory traj;
  traj.initial = initial;
  traj.seed = seed;
  Configuration state = initial;
  Rng rng(stream_seed(seed, stream));
  const auto summary = run_engine(lat, lambda, gamma, state, t_max, rng, LogSink{&traj.events});
  traj.extinct = summary.extinct;
  traj.final_time = summary.extinct ? summary.extinction_time : t_max;
  return traj;
}

}  // namespace

ContactTrajectory simulate_contact(const ContactParams& params, const Configuration& initial,
                                   double t_max, std::uint64_t seed) {
  check_params(params);
  check_initial(*params.window, initial);
  check_horizon(t_max);
  return make_trajectory(*params.window, params.lambda, 0.0, initial, t_max, seed,
                         StreamKind::contact);
}

ContactTrajectory simulate_idle_contact(const IdleParams& params, const Configuration& initial,
                                        double t_max, std::uint64_t seed) {
  check_params(params);
  check_initial(*params.contact.window, initial);
  check_horizon(t_max);
  return make_trajectory(*params.contact.window, params.contact.lambda, params.gamma, initial,
                         t_max, seed, StreamKind::idle_contact);
}

ContactSummary run_contact(const ContactParams& params, const Configuration& initial,
                           double t_max, std::uint64_t seed) {
  check_params(params);
  check_initial(*params.window, initial);
  check_horizon(t_max);
  Configuration state = initial;
  Rng rng(stream_seed(seed, StreamKind::contact));
  return run_engine(*params.window, params.lambda, 0.0, state, t_max, rng, NullSink{});
}

ContactSummary run_idle_contact(const IdleParams& params, const Configuration& initial,
                                double t_max, std::uint64_t seed) {
  check_params(params);
  check_initial(*params.contact.window, initial);
  check_horizon(t_max);
  Configuration state = initial;
  Rng rng(stream_seed(seed, StreamKind::idle_contact));
  return run_engine(*params.contact.window, params.contact.lambda, params.gamma, state, t_max, rng,
                    NullSink{});
}

std::vector<double> sample_extinction_times(const ContactParams& params,
                                            const Configuration& initial, double t_max,
                                            std::size_t trials, std::uint64_t master_seed,
                                            unsigned workers) {
  std::vector<double> out(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    const auto s = run_contact(params, initial, t_max, derive_trial_seed(master_seed, i));
    out[i] = s.extinct ? s.extinction_time : std::numeric_limits<double>::infinity();
  });
  return out;
}

std::vector<double> sample_idle_extinction_times(const IdleParams& params,
                                                 const Configuration& initial, double t_max,
                                                 std::size_t trials, std::uint64_t master_seed,
                                                 unsigned workers) {
  std::vector<double> out(trials);
  parallel_for(trials, workers, [&](std::size_t i) {
    const auto s = run_idle_contact(params, initial, t_max, derive_trial_seed(master_seed, i));
    out[i] = s.extinct ? s.extinction_time : std::numeric_limits<double>::infinity();
  });
  return out;
}

BinomialEstimate survival_estimate(const ContactParams& params, const Configuration& initial,
                                   double t_max, std::size_t trials, std::uint64_t master_seed,
                                   unsigned workers) {
  if (trials < 1) throw ConfigError("survival_estimate needs trials >= 1");
  const auto times = sample_extinction_times(params, initial, t_max, trials, master_seed, workers);
  const auto alive = static_cast<std::size_t>(
      std::count_if(times.begin(), times.end(), [](double t) { return std::isinf(t); }));
  return binomial_estimate(alive, trials);
}

double estimate_lambda_c(const LatticePtr& window, double t_max, std::size_t trials,
                         LambdaBracket bracket, const CriticalSearch& search) {
  if (!window) throw ConfigError("estimate_lambda_c needs a window");
  if (!(bracket.low >= 0.0 && bracket.low < bracket.high)) {
    throw ConfigError("lambda bracket must satisfy 0 <= low < high");
  }
  if (search.iterations < 0) throw ConfigError("bisection iterations must be >= 0");
  Configuration origin(window->vertex_count(), SiteState::vacant);
  origin[window->center()] = SiteState::occupied;
  auto excess = [&](double lambda) {
    const ContactParams params{lambda, window};
    return survival_estimate(params, origin, t_max, trials, search.master_seed, search.workers)
               .fraction -
           search.threshold;
  };
  const double f_low = excess(bracket.low);
  const double f_high = excess(bracket.high);
  if (!(f_low < 0.0 && f_high >= 0.0)) {
    throw DiagnosticError("lambda bracket [" + format_double(bracket.low) + ", " +
                          format_double(bracket.high) +
                          "] does not straddle the survival threshold (excess " +
                          format_double(f_low) + " at low, " + format_double(f_high) +
                          " at high)");
  }
  double lo = bracket.low;
  double hi = bracket.high;
  for (int it = 0; it < search.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------

Occupancy occupancy_from_trajectory(const ContactTrajectory& trajectory,
                                    std::span<const std::uint32_t> block, double from,
                                    double to) {
  if (block.empty()) throw ConfigError("occupancy block must be nonempty");
  const std::size_t n = trajectory.initial.size();
  std::vector<std::uint8_t> in_block(n, 0);
  for (auto v : block) {
    if (v >= n) throw ConfigError("occupancy block site outside the window");
    in_block[v] = 1;
  }
  const auto target = static_cast<std::size_t>(std::count(in_block.begin(), in_block.end(), 1));
  to = std::min(to, trajectory.final_time);

  Configuration state = trajectory.initial;
  std::size_t filled = 0;
  for (std::size_t v = 0; v < n; ++v) {
    filled += in_block[v] && state[v] == SiteState::occupied;
  }

  Occupancy occ;
  CompensatedSum total;
  // Full since `start` if the block is currently fully occupied.
  double start = 0.0;
  bool full = filled == target;
  auto close_interval = [&](double end) {
    const double a = std::max(start, from);
    const double b = std::min(end, to);
    if (b > a) {
      occ.epochs.push_back(a);
      total.add(b - a);
    }
  };
  for (const auto& ev : trajectory.events) {
    if (ev.t > to) break;
    const bool was = state[ev.site] == SiteState::occupied;
    state[ev.site] = ev.kind == EventKind::death ? SiteState::vacant : SiteState::occupied;
    const bool now = state[ev.site] == SiteState::occupied;
    if (!in_block[ev.site] || was == now) continue;
    if (now) {
      ++filled;
      if (filled == target) {
        full = true;
        start = ev.t;
      }
    } else {
      if (full) close_interval(ev.t);
      full = false;
      --filled;
    }
  }
  if (full) close_interval(to);
  occ.total_time = total.value();
  return occ;
}

Occupancy full_occupancy_times(const ContactParams& params, std::span<const std::uint32_t> block,
                               const Configuration& initial, double t_max, std::uint64_t seed) {
  const auto traj = simulate_contact(params, initial, t_max, seed);
  return occupancy_from_trajectory(traj, block, 0.0, t_max);
}

double occupied_space_time(const ContactTrajectory& trajectory) {
  std::size_t count = count_state(trajectory.initial, SiteState::occupied);
  CompensatedSum total;
  double last = 0.0;
  for (const auto& ev : trajectory.events) {
    total.add(static_cast<double>(count) * (ev.t - last));
    last = ev.t;
    count = ev.kind == EventKind::death ? count - 1 : count + 1;
  }
  total.add(static_cast<double>(count) * (trajectory.final_time - last));
  return total.value();
}

std::optional<std::size_t> first_illegal_event(const Lattice& window,
                                               const ContactTrajectory& trajectory) {
  if (trajectory.initial.size() != window.vertex_count()) return 0;
  Configuration state = trajectory.initial;
  double last = 0.0;
  for (std::size_t i = 0; i < trajectory.events.size(); ++i) {
    const auto& ev = trajectory.events[i];
    if (!(ev.t > last) || ev.t > trajectory.final_time || ev.site >= state.size()) return i;
    last = ev.t;
    auto& s = state[ev.site];
    if (ev.kind == EventKind::death) {
      if (s != SiteState::occupied) return i;
      s = SiteState::vacant;
      continue;
    }
    const SiteState required = ev.kind == EventKind::infection ? SiteState::vacant : SiteState::idle;
    if (s != required) return i;
    bool has_source = false;
    window.for_each_neighbor(ev.site, [&](std::size_t w, std::size_t) {
      has_source = has_source || state[w] == SiteState::occupied;
    });
    if (!has_source) return i;
    s = SiteState::occupied;
  }
  return std::nullopt;
}

Configuration replay(const Lattice& window, const ContactTrajectory& trajectory) {
  if (auto bad = first_illegal_event(window, trajectory)) {
    throw DiagnosticError("illegal event at index " + std::to_string(*bad));
  }
  Configuration state = trajectory.initial;
  for (const auto& ev : trajectory.events) {
    state[ev.site] = ev.kind == EventKind::death ? SiteState::vacant : SiteState::occupied;
  }
  return state;
}

// ---------------------------------------------------------------------------

namespace {

struct InitialBuilder {
  const LatticePtr& window;
  std::uint64_t seed;

  Configuration operator()(const initial::Full&) const {
    return Configuration(window->vertex_count(), SiteState::occupied);
  }
  Configuration operator()(const initial::SingleOrigin&) const {
    Configuration c(window->vertex_count(), SiteState::vacant);
    c[window->center()] = SiteState::occupied;
    return c;
  }
  Configuration operator()(const initial::PercolationCluster& k) const {
    if (!(k.p_site >= 0.0 && k.p_site <= 1.0)) throw ConfigError("p_site must lie in [0, 1]");
    const auto sample = sample_percolation(window, PercolationMode::site, k.p_site,
                                           stream_seed(seed, StreamKind::initial));
    const auto labels = label_clusters(sample);
    Configuration c(window->vertex_count(), SiteState::vacant);
    if (labels.largest == kClosedSite) return c;
    for (std::size_t v = 0; v < c.size(); ++v) {
      if (labels.cluster_of[v] == labels.largest) c[v] = SiteState::occupied;
    }
    return c;
  }
  Configuration operator()(const initial::VacantStrips& k) const {
    if (k.width < 0 || k.period <= k.width) {
      throw ConfigError("vacant strips need width >= 0 and period > width");
    }
    Configuration c(window->vertex_count(), SiteState::occupied);
    for (std::size_t v = 0; v < c.size(); ++v) {
      if (window->coordinate(v, 0) % k.period < k.width) c[v] = SiteState::vacant;
    }
    return c;
  }
  Configuration operator()(const initial::UpperInvariant& k) const {
    if (!(k.lambda_big >= 0.0) || !std::isfinite(k.lambda_big)) {
      throw ConfigError("lambda_big must be finite and >= 0");
    }
    if (!(k.burn_in >= 0.0) || !std::isfinite(k.burn_in)) {
      throw ConfigError("burn_in must be finite and >= 0");
    }
    Configuration c(window->vertex_count(), SiteState::occupied);
    if (k.burn_in == 0.0) return c;
    Rng rng(stream_seed(seed, StreamKind::initial, 1));
    run_engine(*window, k.lambda_big, 0.0, c, k.burn_in, rng, NullSink{});
    return c;
  }
};

}  // namespace

Configuration gen_initial(const InitialKind& kind, const LatticePtr& window, std::uint64_t seed) {
  if (!window) throw ConfigError("gen_initial needs a window");
  return std::visit(InitialBuilder{window, seed}, kind);
}

Configuration with_idle_background(Configuration config) {
  for (auto& s : config) {
    if (s != SiteState::occupied) s = SiteState::idle;
  }
  return config;
}

std::size_t count_state(const Configuration& config, SiteState state) {
  return static_cast<std::size_t>(std::count(config.begin(), config.end(), state));
}

void write_trajectory_jsonl(std::ostream& out, const ContactTrajectory& trajectory) {
  static constexpr const char* kNames[] = {"death", "infection", "excitation"};
  for (const auto& ev : trajectory.events) {
    nlohmann::ordered_json j;
    j["t"] = ev.t;
    j["site"] = ev.site;
    j["kind"] = kNames[static_cast<int>(ev.kind)];
    out << j.dump() << '\n';
  }
}

}  // namespace stochlab
