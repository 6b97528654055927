#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedq/config.hpp"
#include "fedq/mdp.hpp"
#include "fedq/protocol.hpp"
#include "fedq/server.hpp"

namespace fedq {

// One row of the metrics CSV. For the single-agent baselines a round is one
// episode and the scalar columns are 0.
struct RoundRecord {
  std::int64_t round = 0;
  double n_k = 0.0;                 // episodes per agent in this round
  double episodes_per_agent = 0.0;  // cumulative, T / H
  std::int64_t steps = 0;           // cumulative T-hat over all agents
  double cumulative_regret = 0.0;
  std::int64_t scalars_down = 0;    // this round, incl. abort relay
  std::int64_t scalars_up = 0;      // this round, incl. agent abort signals
  std::int64_t case1_updates = 0;
  std::int64_t case2_updates = 0;
  std::int64_t optimism_violations = 0;
};

inline constexpr const char* kMetricsHeader =
    "round,n_k,episodes_per_agent,steps,cumulative_regret,scalars_down,"
    "scalars_up,case1_updates,case2_updates,optimism_violations";

std::string format_record(const RoundRecord& r);
RoundRecord parse_record(const std::string& line);

struct RunSummary {
  std::string algorithm;
  std::uint64_t seed = 0;
  Dims dims;
  std::size_t agents = 1;
  std::int64_t rounds = 0;
  double episodes_per_agent = 0.0;
  std::int64_t total_steps = 0;
  double final_regret = 0.0;
  double normalized_regret = 0.0;  // final_regret / sqrt(M T)
  ScalarLedger ledger;
  std::int64_t optimism_violations = 0;
  double iota = 0.0;
  bool synchronous = true;
  std::optional<double> round_bound;  // sync federated runs only
  double wall_time_seconds = 0.0;

  nlohmann::json to_json() const;
  static RunSummary from_json(const nlohmann::json& j);
};

struct RunResult {
  std::vector<RoundRecord> records;
  RunSummary summary;
  std::vector<nlohmann::json> snapshots;  // every snapshot_every rounds
};

// Upper bound on the number of synchronous rounds after T steps per agent.
double max_rounds_bound(std::size_t S, std::size_t A, std::size_t H,
                        std::size_t M, double T);

// Everything the federated loop saw in one round, for instrumentation.
struct RoundObservation {
  const BroadcastMessage& broadcast;
  const RoundOutcome& outcome;
  const AggregatedRound& aggregated;
  const ServerState& server;  // after aggregation
  const RoundRecord& record;
};

struct RunHooks {
  std::function<void(const RoundObservation&)> on_round;
  // Baselines: called after each episode with the pre-episode policy.
  std::function<void(const EpisodeTrajectory&, const RoundRecord&)> on_episode;
};

// Builds the environment a config describes (file or generated).
TabularMdp build_environment(const ExperimentConfig& cfg);

// Runs one seed to its budget. Per-round invariants (visit caps,
// conservation, step identity, regret sign, round bound) are checked and
// throw ConsistencyError when broken.
RunResult run_single(const ExperimentConfig& cfg, const TabularMdp& mdp,
                     const OptimalSolution& optimal, std::uint64_t seed,
                     const RunHooks* hooks = nullptr);

// All seeds (cfg.jobs at a time). When cfg.output is non-empty writes
// <output>/<algorithm>/env.json, config.txt and seed_<s>/{metrics.csv,
// summary.json}.
std::vector<RunResult> run_experiment(const ExperimentConfig& cfg);

void write_run(const std::string& dir, const RunResult& run);

}  // namespace fedq
