#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/protocol.hpp"
#include "fedq/schedule.hpp"

namespace fedq {

enum class Algorithm { kFedQHoeffding, kFedQBernstein, kUcbH, kUcbB };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);
bool is_federated(Algorithm a);

// Flat key = value configuration. Keys (defaults from print-config):
//   algorithm            fedq-hoeffding | fedq-bernstein | ucb-h | ucb-b
//   env.seed, env.states, env.actions, env.horizon
//   env.file             environment JSON; overrides the generated one
//   agents               M (baselines always run with 1)
//   episodes             J, episodes per agent
//   c, c_prime, iota     iota is a number or "theory"
//   p, T0, K0            T0 = 0 means H*M*J, K0 = 0 means J
//   initial_state        uniform | fixed:X | custom:p0,p1,...
//   seeds                comma list, ranges a..b allowed
//   async.rates          empty for lockstep rounds, else one rate per agent
//   async.latency        abort latency in time units of the rate clock
//   broadcast_per_agent  count broadcasts once per receiving agent
//   output               run directory
//   jobs                 seeds simulated concurrently
//   snapshot_every       dump server JSON every n rounds (0 = never)
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kFedQHoeffding;
  std::uint64_t env_seed = 2024;
  Dims env_dims{3, 2, 5};
  std::string env_file;
  std::size_t agents = 10;
  std::int64_t episodes = 30000;
  BonusConfig bonus;
  std::string initial_state = "uniform";
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> async_rates;
  double async_latency = 0.0;
  bool broadcast_per_agent = true;
  std::string output = "runs";
  std::size_t jobs = 1;
  std::int64_t snapshot_every = 0;

  // Not configurable from files; used by in-process callers.
  bool keep_trajectories = false;

  // Effective agent count (1 for the single-agent baselines).
  std::size_t effective_agents() const;
  // T0 and K0 with the zero defaults resolved.
  BonusConfig effective_bonus(std::size_t horizon) const;
  std::optional<SpeedProfile> speed_profile() const;
  InitialStateDistribution initial_distribution(std::size_t states) const;

  void set(const std::string& key, const std::string& value);
  // Rejects inconsistent settings before any episode runs.
  void validate(const Dims& env) const;

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig load(const std::string& path);
  void write(std::ostream& out) const;
};

}  // namespace fedq
