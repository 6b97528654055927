// Command-line front end: generate environments, run experiments, and turn
// run directories into plot-ready CSV files.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedq/config.hpp"
#include "fedq/errors.hpp"
#include "fedq/experiment.hpp"
#include "fedq/mdp.hpp"
#include "fedq/report.hpp"

namespace {

constexpr int kConfigErrorExit = 2;
constexpr int kConsistencyExit = 3;

void apply_overrides(fedq::ExperimentConfig& cfg,
                     const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw fedq::ConfigError("override must look like key=value: '" + o + "'");
    }
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated tabular Q-learning simulator"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-env", "Generate a random tabular MDP");
  std::uint64_t seed = 0;
  std::size_t states = 3, actions = 2, horizon = 5;
  std::string env_out;
  gen->add_option("--seed", seed, "RNG seed")->required();
  gen->add_option("--states", states, "Number of states S")->required();
  gen->add_option("--actions", actions, "Number of actions A")->required();
  gen->add_option("--horizon", horizon, "Episode length H")->required();
  gen->add_option("--out", env_out, "Output JSON file")->required();

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  std::string config_path;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "Config file (key = value)")->required();
  run->add_option("--override", overrides, "key=val, repeatable");

  auto* report = app.add_subcommand("report", "Emit percentile plot data");
  std::string runs_dir, report_out;
  std::size_t points = 200;
  report->add_option("--runs", runs_dir, "Run directory")->required();
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--points", points, "Grid points per curve");

  auto* print = app.add_subcommand("print-config", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigErrorExit;
  }

  try {
    if (*gen) {
      fedq::generate_random_mdp(seed, {states, actions, horizon}).save(env_out);
    } else if (*run) {
      auto cfg = fedq::ExperimentConfig::load(config_path);
      apply_overrides(cfg, overrides);
      const auto results = fedq::run_experiment(cfg);
      for (const auto& r : results) {
        const auto& s = r.summary;
        std::cout << s.algorithm << " seed=" << s.seed << " rounds=" << s.rounds
                  << " regret=" << s.final_regret
                  << " regret/sqrt(MT)=" << s.normalized_regret
                  << " scalars=" << s.ledger.total() << '\n';
      }
    } else if (*report) {
      for (const auto& f : fedq::emit_plot_data(runs_dir, report_out, points)) {
        std::cout << f << '\n';
      }
    } else if (*print) {
      fedq::ExperimentConfig{}.write(std::cout);
    }
  } catch (const fedq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigErrorExit;
  } catch (const fedq::ConsistencyError& e) {
    std::cerr << "internal consistency failure: " << e.what() << '\n';
    return kConsistencyExit;
  }
  return 0;
}
