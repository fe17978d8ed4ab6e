#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stochlab/errors.hpp"
#include "stochlab/stats.hpp"

namespace stochlab {

enum class ExperimentKind : std::uint8_t {
  percolation_scan,
  contact_survival,
  idle_contact,
  exit_laws,
  resistance_scaling,
  neural_phase,
};

std::span<const ExperimentKind> experiment_kinds();
std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);

// A parse or validation failure tied to a config line (0 when the problem is
// not on any one line, such as a missing key).
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

enum class ParamType : std::uint8_t { integer, real, choice, integer_list, real_list };

struct ParamSpec {
  std::string_view name;
  ParamType type;
  std::string_view fallback;  // default, as config text
  double min = 0.0;
  double max = 0.0;
  bool min_open = false;  // (min, max] instead of [min, max]
  std::string_view choices;  // "a|b|c" for ParamType::choice
  std::string_view help;
};

std::span<const ParamSpec> parameter_specs(ExperimentKind kind);

// Grammar, one item per line:
//   [section]      either "experiment" or the section named after the kind
//   key = value    lists are comma separated
//   # comment      also allowed after a value
// [experiment] takes kind (required), seed, trials, workers, out. Every
// kind-specific key absent from the file gets its default.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::percolation_scan;
  std::uint64_t seed = 1;
  std::size_t trials = 100;
  unsigned workers = 0;  // 0: STOCHLAB_WORKERS, else the hardware thread count
  std::string out = "stochlab-out";
  std::map<std::string, std::string, std::less<>> params;

  double real(std::string_view key) const;
  long long integer(std::string_view key) const;
  const std::string& text(std::string_view key) const;
  std::vector<double> reals(std::string_view key) const;
  std::vector<int> integers(std::string_view key) const;
};

ExperimentConfig parse_config(std::string_view text);

// Checks one parameter value against its spec; throws ConfigError.
void check_param(const ParamSpec& spec, std::string_view value);

// Resolves workers == 0 through STOCHLAB_WORKERS.
unsigned resolve_workers(unsigned requested);

struct TrialRow {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  // non-finite values are censored
};

struct SummaryRow {
  std::string output;
  Estimate estimate;  // over finite values
  std::size_t censored = 0;
};

// Names of the scalar outputs each trial row carries, in order.
std::vector<std::string> output_names(const ExperimentConfig& config);

// Trial i of the experiment, seeded by derive_trial_seed(config.seed, i).
TrialRow run_trial(const ExperimentConfig& config, std::size_t trial);

std::vector<SummaryRow> summarize(std::span<const std::string> names,
                                  std::span<const TrialRow> rows);

// {"trial":i,"seed":s,"values":{name: value or null}}
std::string row_json(std::span<const std::string> names, const TrialRow& row);
TrialRow parse_row_json(std::span<const std::string> names, std::string_view line);

// Columns: output, mean, ci, count, censored.
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> summary);

struct RunReport {
  std::filesystem::path directory;
  std::vector<std::string> files;
  std::size_t trials = 0;
  unsigned workers = 1;
  double wall_seconds = 0.0;
};

// Writes rows.jsonl, summary.csv and manifest.json (plus kind-specific
// tables) into config.out. Rows are buffered and written in trial order, so
// the bytes do not depend on the worker count. On failure every file this
// run created is removed before the exception propagates.
RunReport execute_experiment(const ExperimentConfig& config);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// execute_experiment with errors reported on `err` and mapped to exit codes.
int run_experiment(const ExperimentConfig& config, std::ostream& err);

// One line per kind with its parameters, for --help.
std::string describe_kinds();

}  // namespace stochlab
