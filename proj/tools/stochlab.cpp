#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "stochlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Seeded Monte Carlo experiments: percolation, contact processes, walk exit laws,\n"
               "resistor networks on clusters and dynamic long-range neural networks."};
  app.footer("Experiment kinds and their parameters (with defaults):\n" +
             stochlab::describe_kinds() +
             "\nOutputs go to <out>/rows.jsonl, <out>/summary.csv and <out>/manifest.json.\n"
             "Exit codes: 0 success, 2 configuration error, 3 runtime error.\n"
             "STOCHLAB_WORKERS sets the worker count when neither the config nor --workers does.");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "Experiment config file")->required();
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--trials", trials, "Override the trial count");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1U, 1024U));
  app.add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? stochlab::kExitOk : stochlab::kExitConfig;
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << config_path << '\n';
    return stochlab::kExitRuntime;
  }
  std::ostringstream text;
  text << in.rdbuf();

  stochlab::ExperimentConfig config;
  try {
    config = stochlab::parse_config(text.str());
  } catch (const stochlab::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return stochlab::kExitConfig;
  }
  if (seed) config.seed = *seed;
  if (trials) config.trials = *trials;
  if (workers) config.workers = *workers;
  if (out) config.out = *out;

  const int code = stochlab::run_experiment(config, std::cerr);
  if (code == stochlab::kExitOk) {
    std::cout << "wrote " << config.out << "/ (" << config.trials << " trials of "
              << stochlab::to_string(config.kind) << ")\n";
  }
  return code;
}
