#include "stochlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "stochlab/contact.hpp"
#include "stochlab/lattice.hpp"
#include "stochlab/network.hpp"
#include "stochlab/neural.hpp"
#include "stochlab/parallel.hpp"
#include "stochlab/rng.hpp"
#include "stochlab/walks.hpp"

#ifndef STOCHLAB_VERSION
#define STOCHLAB_VERSION "unknown"
#endif

namespace stochlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<ExperimentKind, 6> kKinds{
    ExperimentKind::percolation_scan, ExperimentKind::contact_survival,
    ExperimentKind::idle_contact,     ExperimentKind::exit_laws,
    ExperimentKind::resistance_scaling, ExperimentKind::neural_phase,
};

using PT = ParamType;

constexpr ParamSpec kPercolationSpecs[] = {
    {"d", PT::integer, "2", 1, 3, false, "", "lattice dimension"},
    {"L", PT::integer, "32", 2, 4096, false, "", "window side"},
    {"mode", PT::choice, "bond", 0, 0, false, "bond|site", "percolation mode"},
    {"p", PT::real_list, "0.5", 0, 1, false, "", "open probabilities (coupled across the list)"},
};

#define STOCHLAB_CONTACT_SPECS                                                          \
  {"d", PT::integer, "1", 1, 3, false, "", "lattice dimension"},                        \
      {"L", PT::integer, "200", 2, 1000000, false, "", "window side"},                  \
      {"boundary", PT::choice, "open", 0, 0, false, "open|periodic", "window boundary"}, \
      {"lambda", PT::real, "1.6", 0, 1000, false, "", "infection rate"},                \
      {"t_max", PT::real, "100", 0, 1e9, true, "", "time horizon"},                     \
      {"initial", PT::choice, "single", 0, 0, false, "single|full|cluster|strips|upper", \
       "initial configuration"},                                                        \
      {"p_site", PT::real, "0.7", 0, 1, false, "", "site density for initial = cluster"}, \
      {"strip_width", PT::integer, "2", 0, 1000000, false, "", "vacant strip width"},   \
      {"strip_period", PT::integer, "10", 1, 1000000, false, "", "strip period"},       \
      {"lambda_big", PT::real, "4", 0, 1000, false, "", "rate for initial = upper"},    \
      {"burn_in", PT::real, "10", 0, 1e6, false, "", "burn-in for initial = upper"}

constexpr ParamSpec kContactSpecs[] = {STOCHLAB_CONTACT_SPECS};
constexpr ParamSpec kIdleSpecs[] = {
    STOCHLAB_CONTACT_SPECS,
    {"gamma", PT::real, "1", 0, 1000, false, "", "excitation rate of idle sites"},
};
#undef STOCHLAB_CONTACT_SPECS

constexpr ParamSpec kExitSpecs[] = {
    {"law", PT::choice, "interval", 0, 0, false, "interval|passage|planar", "which walk law"},
    {"n", PT::integer, "100", 1, 100000, false, "", "half-width or passage level"},
    {"r", PT::real, "64", 1, 100000, false, "", "planar exit radius"},
    {"norm", PT::choice, "euclidean", 0, 0, false, "euclidean|sup", "planar norm"},
};

constexpr ParamSpec kScalingSpecs[] = {
    {"d", PT::integer, "2", 2, 3, false, "", "lattice dimension"},
    {"p", PT::real, "1", 0, 1, true, "", "bond probability (supercritical)"},
    {"radii", PT::integer_list, "4,8,16,32", 1, 1000, false, "", "increasing radii n"},
    {"max_attempts", PT::integer, "200", 1, 1000000, false, "", "samples per trial"},
    {"tolerance", PT::real, "1e-10", 0, 1e-3, true, "", "solver tolerance"},
};

constexpr ParamSpec kNeuralSpecs[] = {
    {"N", PT::integer, "20", 0, 2000, false, "", "neurons at -N..N"},
    {"p_nn", PT::real, "0.2", 0, 1, false, "", "nearest-neighbor synapse probability"},
    {"betas", PT::real_list, "0,0.5,1", 0, 1e6, false, "", "long-range amplitudes"},
    {"exponents", PT::real_list, "1.5,2,3", 0, 100, true, "", "decay exponents s"},
    {"mu", PT::real, "1", 0, 1e6, true, "", "refresh rate per synapse"},
    {"t_max", PT::real, "10", 0, 1e6, true, "", "time horizon"},
    {"activity_threshold", PT::real, "0.05", 0, 1, false, "", "nontrivial activity cutoff"},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  for (;;) {
    const auto at = s.find(sep);
    parts.push_back(trim(s.substr(0, at)));
    if (at == std::string_view::npos) return parts;
    s.remove_prefix(at + 1);
  }
}

bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_u64(std::string_view s, std::uint64_t& out) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string range_text(const ParamSpec& spec) {
  return (spec.min_open ? "(" : "[") + format_double(spec.min) + ", " + format_double(spec.max) +
         "]";
}

void check_range(const ParamSpec& spec, std::string_view item, double x) {
  const bool low_ok = spec.min_open ? x > spec.min : x >= spec.min;
  if (!low_ok || x > spec.max) {
    throw ConfigError(std::string(spec.name) + " = " + std::string(item) + " is outside " +
                      range_text(spec));
  }
}

void check_item(const ParamSpec& spec, bool integer, std::string_view item) {
  if (integer) {
    long long v = 0;
    if (!parse_int(item, v)) {
      throw ConfigError(std::string(spec.name) + ": '" + std::string(item) + "' is not an integer");
    }
    check_range(spec, item, static_cast<double>(v));
  } else {
    double v = 0.0;
    if (!parse_real(item, v)) {
      throw ConfigError(std::string(spec.name) + ": '" + std::string(item) +
                        "' is not a finite number");
    }
    check_range(spec, item, v);
  }
}

const ParamSpec* find_spec(ExperimentKind kind, std::string_view key) {
  for (const auto& spec : parameter_specs(kind)) {
    if (spec.name == key) return &spec;
  }
  return nullptr;
}

std::string with_line(int line, const std::string& message) {
  return line > 0 ? "line " + std::to_string(line) + ": " + message : message;
}

}  // namespace

// ---------------------------------------------------------------------------

std::span<const ExperimentKind> experiment_kinds() { return kKinds; }

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::percolation_scan:
      return "percolation_scan";
    case ExperimentKind::contact_survival:
      return "contact_survival";
    case ExperimentKind::idle_contact:
      return "idle_contact";
    case ExperimentKind::exit_laws:
      return "exit_laws";
    case ExperimentKind::resistance_scaling:
      return "resistance_scaling";
    case ExperimentKind::neural_phase:
      return "neural_phase";
  }
  return "?";
}

ExperimentKind parse_kind(std::string_view name) {
  for (auto kind : kKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

ConfigParseError::ConfigParseError(int line, const std::string& message)
    : ConfigError(with_line(line, message)), line_(line) {}

std::span<const ParamSpec> parameter_specs(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::percolation_scan:
      return kPercolationSpecs;
    case ExperimentKind::contact_survival:
      return kContactSpecs;
    case ExperimentKind::idle_contact:
      return kIdleSpecs;
    case ExperimentKind::exit_laws:
      return kExitSpecs;
    case ExperimentKind::resistance_scaling:
      return kScalingSpecs;
    case ExperimentKind::neural_phase:
      return kNeuralSpecs;
  }
  return {};
}

void check_param(const ParamSpec& spec, std::string_view value) {
  switch (spec.type) {
    case ParamType::integer:
    case ParamType::real:
      check_item(spec, spec.type == ParamType::integer, value);
      return;
    case ParamType::integer_list:
    case ParamType::real_list:
      for (auto item : split(value, ',')) {
        check_item(spec, spec.type == ParamType::integer_list, item);
      }
      return;
    case ParamType::choice:
      for (auto option : split(spec.choices, '|')) {
        if (option == value) return;
      }
      throw ConfigError(std::string(spec.name) + " = " + std::string(value) + " is not one of " +
                        std::string(spec.choices));
  }
}

double ExperimentConfig::real(std::string_view key) const {
  double v = 0.0;
  if (!parse_real(text(key), v)) throw ConfigError(std::string(key) + " is not a number");
  return v;
}

long long ExperimentConfig::integer(std::string_view key) const {
  long long v = 0;
  if (!parse_int(text(key), v)) throw ConfigError(std::string(key) + " is not an integer");
  return v;
}

const std::string& ExperimentConfig::text(std::string_view key) const {
  const auto it = params.find(key);
  if (it == params.end()) throw ConfigError("missing parameter " + std::string(key));
  return it->second;
}

std::vector<double> ExperimentConfig::reals(std::string_view key) const {
  std::vector<double> out;
  for (auto item : split(text(key), ',')) {
    double v = 0.0;
    if (!parse_real(item, v)) throw ConfigError(std::string(key) + " holds a non-number");
    out.push_back(v);
  }
  return out;
}

std::vector<int> ExperimentConfig::integers(std::string_view key) const {
  std::vector<int> out;
  for (auto item : split(text(key), ',')) {
    long long v = 0;
    if (!parse_int(item, v)) throw ConfigError(std::string(key) + " holds a non-integer");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  struct Entry {
    std::string value;
    int line;
  };
  struct Section {
    std::string name;
    int line;
    std::vector<std::pair<std::string, Entry>> entries;
  };
  std::vector<Section> sections;

  int line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(line_no, "unterminated section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigParseError(line_no, "empty section name");
      for (const auto& s : sections) {
        if (s.name == name) {
          throw ConfigParseError(line_no, "duplicate section [" + std::string(name) +
                                              "] (first at line " + std::to_string(s.line) + ")");
        }
      }
      sections.push_back({std::string(name), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigParseError(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigParseError(line_no, "missing key before '='");
    if (value.empty()) throw ConfigParseError(line_no, "missing value for " + std::string(key));
    if (sections.empty()) {
      throw ConfigParseError(line_no, "key " + std::string(key) + " appears before any section");
    }
    auto& entries = sections.back().entries;
    for (const auto& [k, e] : entries) {
      if (k == key) {
        throw ConfigParseError(line_no, "duplicate key " + std::string(key) + " (first at line " +
                                            std::to_string(e.line) + ")");
      }
    }
    entries.push_back({std::string(key), {std::string(value), line_no}});
  }

  const auto experiment = std::find_if(sections.begin(), sections.end(),
                                       [](const Section& s) { return s.name == "experiment"; });
  if (experiment == sections.end()) throw ConfigParseError(0, "missing [experiment] section");

  ExperimentConfig config;
  bool have_kind = false;
  for (const auto& [key, e] : experiment->entries) {
    if (key == "kind") {
      try {
        config.kind = parse_kind(e.value);
      } catch (const ConfigError& err) {
        throw ConfigParseError(e.line, err.what());
      }
      have_kind = true;
    } else if (key == "seed") {
      if (!parse_u64(e.value, config.seed)) {
        throw ConfigParseError(e.line, "seed = " + e.value + " is not a 64-bit unsigned integer");
      }
    } else if (key == "trials" || key == "workers") {
      const ParamSpec spec{key == "trials" ? "trials" : "workers", PT::integer, "", 0,
                           key == "trials" ? 1e9 : 1024, false, "", ""};
      try {
        check_param(spec, e.value);
      } catch (const ConfigError& err) {
        throw ConfigParseError(e.line, err.what());
      }
      long long v = 0;
      parse_int(e.value, v);
      if (key == "trials") {
        config.trials = static_cast<std::size_t>(v);
      } else {
        config.workers = static_cast<unsigned>(v);
      }
    } else if (key == "out") {
      config.out = e.value;
    } else {
      throw ConfigParseError(e.line, "unknown key " + key + " in [experiment]");
    }
  }
  if (!have_kind) {
    throw ConfigParseError(0, "missing required key kind in [experiment] (line " +
                                  std::to_string(experiment->line) + ")");
  }

  const auto kind_name = to_string(config.kind);
  for (const auto& section : sections) {
    if (section.name == "experiment") continue;
    if (section.name != kind_name) {
      bool is_kind = false;
      for (auto k : kKinds) is_kind = is_kind || to_string(k) == section.name;
      throw ConfigParseError(section.line,
                             is_kind ? "section [" + section.name + "] does not match kind " +
                                           std::string(kind_name)
                                     : "unknown section [" + section.name + "]");
    }
    for (const auto& [key, e] : section.entries) {
      const auto* spec = find_spec(config.kind, key);
      if (spec == nullptr) {
        throw ConfigParseError(e.line,
                               "unknown key " + key + " in [" + std::string(kind_name) + "]");
      }
      try {
        check_param(*spec, e.value);
      } catch (const ConfigError& err) {
        throw ConfigParseError(e.line, err.what());
      }
      config.params[key] = e.value;
    }
  }
  for (const auto& spec : parameter_specs(config.kind)) {
    config.params.try_emplace(std::string(spec.name), spec.fallback);
  }
  return config;
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("STOCHLAB_WORKERS"); env != nullptr && *env != '\0') {
    long long v = 0;
    if (!parse_int(trim(env), v) || v < 1 || v > 1024) {
      throw ConfigError("STOCHLAB_WORKERS must be an integer in [1, 1024]");
    }
    return static_cast<unsigned>(v);
  }
  return default_workers();
}

// ---------------------------------------------------------------------------

namespace {

using Table = std::pair<std::string, std::string>;  // file name, contents

class Runner {
 public:
  virtual ~Runner() = default;
  virtual std::vector<std::string> names() const = 0;
  virtual std::vector<double> trial(std::size_t index, std::uint64_t seed) const = 0;
  virtual std::vector<Table> tables(std::span<const TrialRow>) const { return {}; }
};

LatticePtr bounded_window(int d, long long side, Boundary boundary) {
  double sites = 1.0;
  for (int i = 0; i < d; ++i) sites *= static_cast<double>(side);
  if (sites > 2e7) throw ConfigError("window of L^d = " + format_double(sites) + " sites is too large");
  return make_lattice(d, static_cast<int>(side), boundary);
}

class PercolationRunner final : public Runner {
 public:
  explicit PercolationRunner(const ExperimentConfig& c)
      : window_(bounded_window(static_cast<int>(c.integer("d")), c.integer("L"), Boundary::open)),
        mode_(parse_mode(c.text("mode"))),
        ps_(c.reals("p")) {}

  std::vector<std::string> names() const override {
    std::vector<std::string> out;
    for (double p : ps_) {
      out.push_back("spanning@p=" + format_double(p));
      out.push_back("largest_fraction@p=" + format_double(p));
    }
    return out;
  }

  // Keyed flags make the samples at different p monotonically coupled.
  std::vector<double> trial(std::size_t, std::uint64_t seed) const override {
    std::vector<double> out;
    for (double p : ps_) {
      const auto labels = label_clusters(sample_percolation(window_, mode_, p, seed));
      out.push_back(spanning_present(labels, 0) ? 1.0 : 0.0);
      out.push_back(labels.largest == kClosedSite
                        ? 0.0
                        : static_cast<double>(labels.sizes[static_cast<std::size_t>(labels.largest)]) /
                              static_cast<double>(window_->vertex_count()));
    }
    return out;
  }

 private:
  LatticePtr window_;
  PercolationMode mode_;
  std::vector<double> ps_;
};

InitialKind initial_kind(const ExperimentConfig& c) {
  const auto& name = c.text("initial");
  if (name == "full") return initial::Full{};
  if (name == "cluster") return initial::PercolationCluster{c.real("p_site")};
  if (name == "strips") {
    return initial::VacantStrips{static_cast<int>(c.integer("strip_width")),
                                 static_cast<int>(c.integer("strip_period"))};
  }
  if (name == "upper") return initial::UpperInvariant{c.real("lambda_big"), c.real("burn_in")};
  return initial::SingleOrigin{};
}

class ContactRunner final : public Runner {
 public:
  ContactRunner(const ExperimentConfig& c, bool idle)
      : idle_(idle),
        window_(bounded_window(static_cast<int>(c.integer("d")), c.integer("L"),
                               parse_boundary(c.text("boundary")))),
        lambda_(c.real("lambda")),
        gamma_(idle ? c.real("gamma") : 0.0),
        t_max_(c.real("t_max")),
        initial_(initial_kind(c)) {
    if (const auto* strips = std::get_if<initial::VacantStrips>(&initial_);
        strips != nullptr && strips->period <= strips->width) {
      throw ConfigError("strip_period must exceed strip_width");
    }
  }

  std::vector<std::string> names() const override {
    return {"survived", "extinction_time", "occupied_at_end", "events"};
  }

  std::vector<double> trial(std::size_t, std::uint64_t seed) const override {
    auto init = gen_initial(initial_, window_, seed);
    ContactSummary s;
    if (idle_) {
      s = run_idle_contact({{lambda_, window_}, gamma_}, with_idle_background(std::move(init)),
                           t_max_, seed);
    } else {
      s = run_contact({lambda_, window_}, init, t_max_, seed);
    }
    return {s.extinct ? 0.0 : 1.0, s.extinct ? s.extinction_time : kInf,
            static_cast<double>(s.occupied_at_end), static_cast<double>(s.events)};
  }

 private:
  bool idle_;
  LatticePtr window_;
  double lambda_;
  double gamma_;
  double t_max_;
  InitialKind initial_;
};

std::string comparisons_json(const std::vector<LawComparison>& list) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : list) arr.push_back(nlohmann::ordered_json::parse(to_json(c)));
  return arr.dump(2) + "\n";
}

class ExitRunner final : public Runner {
 public:
  explicit ExitRunner(const ExperimentConfig& c)
      : law_(c.text("law")),
        n_(static_cast<int>(c.integer("n"))),
        r_(c.real("r")),
        norm_(c.text("norm") == "sup" ? PlanarNorm::sup : PlanarNorm::euclidean) {}

  std::vector<std::string> names() const override {
    if (law_ == "planar") return {"scaled_time", "angle", "scaled_running_max"};
    return {"scaled_time", "steps"};
  }

  std::vector<double> trial(std::size_t, std::uint64_t seed) const override {
    const double n2 = static_cast<double>(n_) * static_cast<double>(n_);
    if (law_ == "interval") {
      const auto rec = interval_exit(n_, seed);
      return {static_cast<double>(rec.time) / n2, static_cast<double>(rec.time)};
    }
    if (law_ == "passage") {
      const auto rec = first_passage(n_, seed);
      if (rec.censored) return {kInf, kInf};
      return {static_cast<double>(rec.time) / n2, static_cast<double>(rec.time)};
    }
    const auto rec = planar_disk_exit(r_, seed, norm_);
    return {static_cast<double>(rec.time) / (r_ * r_), rec.angle, rec.running_max / r_};
  }

  std::vector<Table> tables(std::span<const TrialRow> rows) const override {
    std::vector<LawComparison> list;
    if (!rows.empty()) {
      std::vector<double> scaled;
      for (const auto& row : rows) scaled.push_back(row.values[0]);
      if (law_ == "interval") {
        const double d = ks_statistic(scaled, limit_exit_cdf);
        list.push_back({"ks_interval_exit", d, 0.02, d < 0.02});
      } else if (law_ == "passage") {
        const double d = ks_statistic_truncated(scaled, levy_cdf, 100.0);
        list.push_back({"ks_first_passage", d, 0.02, d < 0.02});
      } else {
        constexpr int kBins = 16;
        std::vector<double> observed(kBins, 0.0);
        for (const auto& row : rows) {
          const auto bin = static_cast<int>(row.values[1] / (2.0 * std::numbers::pi) * kBins);
          observed[static_cast<std::size_t>(std::clamp(bin, 0, kBins - 1))] += 1.0;
        }
        const std::vector<double> expected(kBins, static_cast<double>(rows.size()) / kBins);
        const auto chi = chi_square_test(observed, expected);
        list.push_back({"angle_uniformity_p_value", chi.p_value, 0.001, chi.p_value > 0.001});
      }
    }
    return {{"law.json", comparisons_json(list)}};
  }

 private:
  std::string law_;
  int n_;
  double r_;
  PlanarNorm norm_;
};

class ScalingRunner final : public Runner {
 public:
  explicit ScalingRunner(const ExperimentConfig& c) {
    config_.dimension = static_cast<int>(c.integer("d"));
    config_.p = c.real("p");
    config_.radii = c.integers("radii");
    config_.trials = c.trials;
    config_.master_seed = c.seed;
    config_.max_attempts_per_trial = static_cast<std::size_t>(c.integer("max_attempts"));
    config_.tolerance = c.real("tolerance");
    window_ = scaling_window(config_);
  }

  std::vector<std::string> names() const override {
    std::vector<std::string> out;
    for (int n : config_.radii) out.push_back("R@n=" + std::to_string(n));
    for (int n : config_.radii) out.push_back("pesc@n=" + std::to_string(n));
    out.emplace_back("boundary_volume");
    out.emplace_back("attempts");
    return out;
  }

  std::vector<double> trial(std::size_t index, std::uint64_t) const override {
    const auto t = scaling_trial(config_, window_, index);
    std::vector<double> out = t.resistance;
    out.insert(out.end(), t.escape.begin(), t.escape.end());
    out.push_back(t.ratio);
    out.push_back(static_cast<double>(t.attempts));
    return out;
  }

  std::vector<Table> tables(std::span<const TrialRow> rows) const override {
    const std::size_t k = config_.radii.size();
    std::vector<ScalingTrial> trials;
    for (const auto& row : rows) {
      ScalingTrial t;
      t.resistance.assign(row.values.begin(), row.values.begin() + static_cast<std::ptrdiff_t>(k));
      t.escape.assign(row.values.begin() + static_cast<std::ptrdiff_t>(k),
                      row.values.begin() + static_cast<std::ptrdiff_t>(2 * k));
      t.ratio = row.values[2 * k];
      t.attempts = static_cast<std::size_t>(row.values[2 * k + 1]);
      trials.push_back(std::move(t));
    }
    const auto table = tabulate_scaling(config_, trials);
    std::ostringstream csv;
    write_scaling_csv(csv, table);
    nlohmann::ordered_json fit;
    fit["model"] = table.fit.model == GrowthModel::logarithmic ? "a + b ln n" : "a - b / n";
    fit["a"] = table.fit.a;
    fit["b"] = table.fit.b;
    fit["r_squared"] = table.fit.r_squared;
    fit["increments"] = table.fit.increments;
    fit["boundary_volume"] = table.boundary_volume.mean;
    fit["boundary_volume_ci"] = table.boundary_volume.ci;
    fit["resamples"] = table.resamples;
    return {{"scaling.csv", csv.str()}, {"fit.json", fit.dump(2) + "\n"}};
  }

 private:
  ScalingConfig config_;
  LatticePtr window_;
};

class NeuralRunner final : public Runner {
 public:
  explicit NeuralRunner(const ExperimentConfig& c) {
    config_.N = static_cast<int>(c.integer("N"));
    config_.p_nn = c.real("p_nn");
    config_.betas = c.reals("betas");
    config_.exponents = c.reals("exponents");
    config_.mu = c.real("mu");
    config_.t_max = c.real("t_max");
    config_.activity_threshold = c.real("activity_threshold");
    config_.trials = c.trials;
    config_.master_seed = c.seed;
    validate(config_);
  }

  std::vector<std::string> names() const override {
    std::vector<std::string> out;
    for (double beta : config_.betas) {
      for (double s : config_.exponents) {
        out.push_back("activity@beta=" + format_double(beta) + ",s=" + format_double(s));
      }
    }
    return out;
  }

  std::vector<double> trial(std::size_t index, std::uint64_t) const override {
    return phase_trial(config_, index);
  }

  std::vector<Table> tables(std::span<const TrialRow> rows) const override {
    std::vector<double> values;
    for (const auto& row : rows) values.insert(values.end(), row.values.begin(), row.values.end());
    const auto map = phase_map_from_values(config_, values);
    std::ostringstream mean;
    std::ostringstream ci;
    std::ostringstream json;
    write_phase_csv(mean, map, false);
    write_phase_csv(ci, map, true);
    write_phase_json(json, map);
    return {{"phase.csv", mean.str()}, {"phase_ci.csv", ci.str()}, {"phase.json", json.str()}};
  }

 private:
  PhaseScanConfig config_;
};

std::unique_ptr<Runner> make_runner(const ExperimentConfig& config) {
  for (const auto& spec : parameter_specs(config.kind)) check_param(spec, config.text(spec.name));
  switch (config.kind) {
    case ExperimentKind::percolation_scan:
      return std::make_unique<PercolationRunner>(config);
    case ExperimentKind::contact_survival:
      return std::make_unique<ContactRunner>(config, false);
    case ExperimentKind::idle_contact:
      return std::make_unique<ContactRunner>(config, true);
    case ExperimentKind::exit_laws:
      return std::make_unique<ExitRunner>(config);
    case ExperimentKind::resistance_scaling:
      return std::make_unique<ScalingRunner>(config);
    case ExperimentKind::neural_phase:
      return std::make_unique<NeuralRunner>(config);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace

std::vector<std::string> output_names(const ExperimentConfig& config) {
  return make_runner(config)->names();
}

TrialRow run_trial(const ExperimentConfig& config, std::size_t trial) {
  const std::uint64_t seed = derive_trial_seed(config.seed, trial);
  return {trial, seed, make_runner(config)->trial(trial, seed)};
}

std::vector<SummaryRow> summarize(std::span<const std::string> names,
                                  std::span<const TrialRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<double> finite;
  for (std::size_t j = 0; j < names.size(); ++j) {
    SummaryRow s;
    s.output = names[j];
    finite.clear();
    for (const auto& row : rows) {
      const double x = row.values.at(j);
      if (std::isfinite(x)) {
        finite.push_back(x);
      } else {
        ++s.censored;
      }
    }
    s.estimate = mean_ci(finite);
    out.push_back(std::move(s));
  }
  return out;
}

std::string row_json(std::span<const std::string> names, const TrialRow& row) {
  nlohmann::ordered_json j;
  j["trial"] = row.trial;
  j["seed"] = row.seed;
  auto& values = j["values"] = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double x = row.values.at(k);
    if (std::isfinite(x)) {
      values[names[k]] = x;
    } else {
      values[names[k]] = nullptr;
    }
  }
  return j.dump();
}

TrialRow parse_row_json(std::span<const std::string> names, std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  TrialRow row;
  row.trial = j.at("trial").get<std::size_t>();
  row.seed = j.at("seed").get<std::uint64_t>();
  const auto& values = j.at("values");
  for (const auto& name : names) {
    const auto& v = values.at(name);
    row.values.push_back(v.is_null() ? kInf : v.get<double>());
  }
  return row;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> summary) {
  out << "output,mean,ci,count,censored\n";
  for (const auto& s : summary) {
    out << s.output << ',' << format_double(s.estimate.mean) << ','
        << format_double(s.estimate.ci) << ',' << s.estimate.count << ',' << s.censored << '\n';
  }
}

namespace {

// Holds the run's files as temporaries until every one is written, then
// renames them into place; anything left over is deleted on unwind.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : created_) std::filesystem::remove(p, ec);
    if (made_dir_) std::filesystem::remove(dir_, ec);  // only succeeds when empty
  }

  void prepare() {
    std::error_code ec;
    if (!std::filesystem::exists(dir_, ec)) {
      std::filesystem::create_directories(dir_);
      made_dir_ = true;
    } else if (!std::filesystem::is_directory(dir_, ec)) {
      throw std::runtime_error("output path " + dir_.string() + " is not a directory");
    }
  }

  void stage(const std::string& name, const std::string& contents) {
    const auto tmp = dir_ / (name + ".partial");
    created_.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.close();
    if (!out) throw std::runtime_error("failed to write " + tmp.string());
    names_.push_back(name);
  }

  void commit() {
    for (const auto& name : names_) {
      const auto final_path = dir_ / name;
      std::filesystem::rename(dir_ / (name + ".partial"), final_path);
      created_.push_back(final_path);
    }
    committed_ = true;
  }

  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> created_;
  std::vector<std::string> names_;
  bool made_dir_ = false;
  bool committed_ = false;
};

}  // namespace

RunReport execute_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.out.empty()) throw ConfigError("output path must be nonempty");
  if (config.trials > 1'000'000'000) throw ConfigError("trials must be <= 1e9");
  const auto runner = make_runner(config);
  const auto names = runner->names();
  const unsigned workers = resolve_workers(config.workers);

  std::vector<TrialRow> rows(config.trials);
  parallel_for(config.trials, workers, [&](std::size_t i) {
    const std::uint64_t seed = derive_trial_seed(config.seed, i);
    rows[i] = {i, seed, runner->trial(i, seed)};
  });
  const auto summary = summarize(names, rows);
  const auto tables = runner->tables(rows);

  std::string rows_text;
  for (const auto& row : rows) {
    rows_text += row_json(names, row);
    rows_text += '\n';
  }
  std::ostringstream summary_text;
  write_summary_csv(summary_text, summary);

  OutputSet output(config.out);
  output.prepare();
  output.stage("rows.jsonl", rows_text);
  output.stage("summary.csv", summary_text.str());
  for (const auto& [name, contents] : tables) output.stage(name, contents);

  RunReport report;
  report.directory = config.out;
  report.trials = config.trials;
  report.workers = workers;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json manifest;
  manifest["kind"] = to_string(config.kind);
  auto& echo = manifest["config"];
  echo["experiment"]["kind"] = to_string(config.kind);
  echo["experiment"]["seed"] = config.seed;
  echo["experiment"]["trials"] = config.trials;
  echo["experiment"]["workers"] = config.workers;
  echo["experiment"]["out"] = config.out;
  for (const auto& spec : parameter_specs(config.kind)) {
    echo[std::string(to_string(config.kind))][std::string(spec.name)] = config.text(spec.name);
  }
  manifest["outputs"] = names;
  manifest["files"] = output.names();
  manifest["versions"]["stochlab"] = STOCHLAB_VERSION;
  manifest["versions"]["compiler"] = __VERSION__;
  manifest["versions"]["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  manifest["workers_used"] = workers;
  manifest["wall_seconds"] = report.wall_seconds;
  output.stage("manifest.json", manifest.dump(2) + "\n");
  output.commit();
  report.files = output.names();
  return report;
}

int run_experiment(const ExperimentConfig& config, std::ostream& err) {
  try {
    execute_experiment(config);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::string describe_kinds() {
  std::string out;
  for (auto kind : kKinds) {
    out += "  ";
    out += to_string(kind);
    out += "\n   ";
    for (const auto& spec : parameter_specs(kind)) {
      out += ' ';
      out += spec.name;
      out += '=';
      out += spec.fallback;
    }
    out += '\n';
  }
  return out;
}

}  // namespace stochlab
