#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/rng.hpp"

namespace fedq {

enum class Variant { kHoeffding, kBernstein };

// Server -> agents at the start of round k. Tables are indexed (h, x) with
// the action implied by the policy.
struct BroadcastMessage {
  std::int64_t round = 0;
  DeterministicPolicy policy;
  std::vector<std::int64_t> visit_counts;  // N_h^k(x, pi_h^k(x))
  ValueTable values;                       // V_h^k; row H is the zero boundary

  std::size_t horizon() const { return policy.horizon(); }
  std::size_t num_states() const { return policy.num_states(); }
};

// Agent -> server at the end of round k.
struct AgentReport {
  std::size_t agent = 0;
  std::int64_t round = 0;
  std::vector<double> rewards;             // r_h(x, pi_h^k(x))
  std::vector<std::int64_t> visit_counts;  // n_h^{m,k}
  std::vector<double> value_means;         // v_{h+1}^{m,k}
  std::optional<std::vector<double>> square_means;  // mu_h^{m,k}, Bernstein
};

struct AbortSignal {
  std::size_t agent = 0;
  std::int64_t round = 0;
};

struct ScalarLedger {
  std::int64_t scalars_down = 0;
  std::int64_t scalars_up = 0;
  std::int64_t signals = 0;

  std::int64_t total() const { return scalars_down + scalars_up + signals; }
  ScalarLedger& operator+=(const ScalarLedger& o) {
    scalars_down += o.scalars_down;
    scalars_up += o.scalars_up;
    signals += o.signals;
    return *this;
  }
  bool operator==(const ScalarLedger&) const = default;
};

// One scalar per integer or real on the wire.
std::int64_t count_scalars(const BroadcastMessage& msg);
std::int64_t count_scalars(const AgentReport& report);
std::int64_t count_scalars(const AbortSignal& signal);

// Everything a round needs besides the broadcast. One random stream per
// agent; streams persist across rounds.
struct RoundEnvironment {
  const TabularMdp* mdp = nullptr;
  const InitialStateDistribution* initial = nullptr;
  std::span<Rng> agent_streams;
  Variant variant = Variant::kHoeffding;
  // When false a broadcast (and the abort relay) is counted once rather than
  // once per receiving agent.
  bool broadcast_per_agent = true;
  bool keep_trajectories = false;
};

struct RoundOutcome {
  std::vector<AgentReport> reports;
  std::vector<std::int64_t> episodes_per_agent;    // n^{m,k}
  std::vector<std::int64_t> initial_state_counts;  // x_1 histogram, all agents
  std::vector<std::size_t> triggered_agents;
  ScalarLedger ledger;
  // Per agent, in episode order; only filled when keep_trajectories is set.
  std::vector<std::vector<EpisodeTrajectory>> trajectories;

  std::int64_t total_episodes() const;
};

// Lockstep execution: episode j finishes at every agent before episode j+1
// starts; the round ends after the first episode in which any agent reaches
// a visit cap.
RoundOutcome run_round_synchronous(const BroadcastMessage& msg,
                                   const RoundEnvironment& env);

// Agent m completes its j-th episode at time j / rates[m]. The first cap hit
// at time tau aborts the round; every other agent stops at the end of its
// first episode finishing at or after tau + latency. Completions sharing a
// timestamp are processed as one batch before any abort check.
struct SpeedProfile {
  std::vector<double> rates;
  double latency = 0.0;
};

RoundOutcome run_round_asynchronous(const BroadcastMessage& msg,
                                    const RoundEnvironment& env,
                                    const SpeedProfile& speeds);

}  // namespace fedq
