#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "stochlab/lattice.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

// In the idle variant `occupied` is the excited state.
enum class SiteState : std::uint8_t { vacant = 0, occupied = 1, idle = 2 };
inline constexpr SiteState kExcited = SiteState::occupied;

using Configuration = std::vector<SiteState>;

// Death rate is 1 (time unit). Infections aimed outside the window are lost.
struct ContactParams {
  double lambda = 0.0;
  LatticePtr window;
};

// Excited sites additionally try to excite each idle neighbor at rate gamma.
struct IdleParams {
  ContactParams contact;
  double gamma = 0.0;
};

enum class EventKind : std::uint8_t { death, infection, excitation };

struct ContactEvent {
  double t;
  std::uint32_t site;
  EventKind kind;
};

struct ContactTrajectory {
  Configuration initial;
  std::vector<ContactEvent> events;
  double final_time = 0.0;  // t_max, or the extinction time
  bool extinct = false;
  std::uint64_t seed = 0;
};

// Exact event-driven realization from `initial` up to t_max or extinction.
ContactTrajectory simulate_contact(const ContactParams& params, const Configuration& initial,
                                   double t_max, std::uint64_t seed);

// Idle sites in `initial` are inert until excited. Extinction means no
// excited site remains.
ContactTrajectory simulate_idle_contact(const IdleParams& params, const Configuration& initial,
                                        double t_max, std::uint64_t seed);

// Outcome of a run without an event log.
struct ContactSummary {
  bool extinct = false;
  double extinction_time = 0.0;  // valid when extinct
  std::size_t occupied_at_end = 0;
  std::size_t events = 0;
};

ContactSummary run_contact(const ContactParams& params, const Configuration& initial,
                           double t_max, std::uint64_t seed);
ContactSummary run_idle_contact(const IdleParams& params, const Configuration& initial,
                                double t_max, std::uint64_t seed);

// Extinction times of independent trials; +infinity where the process is
// alive at t_max. Trial i uses derive_trial_seed(master_seed, i).
std::vector<double> sample_extinction_times(const ContactParams& params,
                                            const Configuration& initial, double t_max,
                                            std::size_t trials, std::uint64_t master_seed,
                                            unsigned workers = 1);
std::vector<double> sample_idle_extinction_times(const IdleParams& params,
                                                 const Configuration& initial, double t_max,
                                                 std::size_t trials, std::uint64_t master_seed,
                                                 unsigned workers = 1);

// Fraction of trials alive at t_max.
BinomialEstimate survival_estimate(const ContactParams& params, const Configuration& initial,
                                   double t_max, std::size_t trials, std::uint64_t master_seed,
                                   unsigned workers = 1);

struct LambdaBracket {
  double low = 1.2;
  double high = 2.2;
};

struct CriticalSearch {
  double threshold = 0.05;
  int iterations = 7;
  std::uint64_t master_seed = 0x5eed;
  unsigned workers = 1;
};

// Bisects survival(lambda) - threshold from a single occupied center site,
// reusing one master seed at every lambda. Returns the final midpoint.
// Throws DiagnosticError when the bracket ends do not straddle the threshold.
double estimate_lambda_c(const LatticePtr& window, double t_max, std::size_t trials,
                         LambdaBracket bracket, const CriticalSearch& search = {});

struct Occupancy {
  std::vector<double> epochs;  // left ends of maximal all-of-B-occupied intervals
  double total_time = 0.0;
};

// Measured over [from, to] of the trajectory (to is clamped to final_time).
Occupancy occupancy_from_trajectory(const ContactTrajectory& trajectory,
                                    std::span<const std::uint32_t> block, double from,
                                    double to);

Occupancy full_occupancy_times(const ContactParams& params, std::span<const std::uint32_t> block,
                               const Configuration& initial, double t_max, std::uint64_t seed);

// Integral over time of the number of occupied sites.
double occupied_space_time(const ContactTrajectory& trajectory);

// Replays the log, checking each event against the state it acts on and that
// times strictly increase. Returns the index of the first illegal event.
std::optional<std::size_t> first_illegal_event(const Lattice& window,
                                               const ContactTrajectory& trajectory);
Configuration replay(const Lattice& window, const ContactTrajectory& trajectory);

namespace initial {
struct Full {};
struct SingleOrigin {};
struct PercolationCluster {
  double p_site;
};
struct VacantStrips {
  int width;
  int period;
};
struct UpperInvariant {
  double lambda_big;
  double burn_in;
};
}  // namespace initial

using InitialKind = std::variant<initial::Full, initial::SingleOrigin, initial::PercolationCluster,
                                 initial::VacantStrips, initial::UpperInvariant>;

Configuration gen_initial(const InitialKind& kind, const LatticePtr& window, std::uint64_t seed);

// Occupied sites stay excited; every other site becomes idle.
Configuration with_idle_background(Configuration config);

std::size_t count_state(const Configuration& config, SiteState state);

// One JSON object per line: {"t":..,"site":..,"kind":"death"|"infection"|"excitation"}.
void write_trajectory_jsonl(std::ostream& out, const ContactTrajectory& trajectory);

}  // namespace stochlab
