#include "fedq/protocol.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fedq/agent.hpp"
#include "fedq/errors.hpp"

namespace fedq {

std::int64_t count_scalars(const BroadcastMessage& msg) {
  // policy + N under policy + V, each one value per (h, x).
  return static_cast<std::int64_t>(3 * msg.horizon() * msg.num_states());
}

std::int64_t count_scalars(const AgentReport& report) {
  const auto cells = static_cast<std::int64_t>(report.visit_counts.size());
  return (report.square_means ? 4 : 3) * cells;
}

std::int64_t count_scalars(const AbortSignal&) { return 1; }

std::int64_t RoundOutcome::total_episodes() const {
  return std::accumulate(episodes_per_agent.begin(), episodes_per_agent.end(),
                         std::int64_t{0});
}

namespace {

void validate(const BroadcastMessage& msg, const RoundEnvironment& env) {
  if (env.mdp == nullptr || env.initial == nullptr) {
    throw std::invalid_argument("round environment is incomplete");
  }
  if (env.agent_streams.empty()) {
    throw std::invalid_argument("a round needs at least one agent");
  }
  const auto& d = env.mdp->dims();
  if (msg.horizon() != d.horizon || msg.num_states() != d.states ||
      msg.visit_counts.size() != d.horizon * d.states) {
    throw std::invalid_argument("broadcast does not match the environment");
  }
}

struct RoundRunner {
  const BroadcastMessage& msg;
  const RoundEnvironment& env;
  std::vector<AgentRoundState> agents;
  RoundOutcome out;

  RoundRunner(const BroadcastMessage& m, const RoundEnvironment& e)
      : msg(m), env(e) {
    const std::size_t M = env.agent_streams.size();
    const bool squares = env.variant == Variant::kBernstein;
    agents.reserve(M);
    for (std::size_t i = 0; i < M; ++i) {
      agents.emplace_back(i, M, env.mdp->num_actions(), msg, squares);
    }
    out.initial_state_counts.assign(env.mdp->num_states(), 0);
    if (env.keep_trajectories) out.trajectories.resize(M);
  }

  bool play(std::size_t m) {
    Rng& rng = env.agent_streams[m];
    const std::size_t x1 = env.initial->sample(rng);
    ++out.initial_state_counts[x1];
    auto result = agents[m].run_episode_and_check(*env.mdp, x1, rng);
    if (env.keep_trajectories) {
      out.trajectories[m].push_back(std::move(result.trajectory));
    }
    if (result.triggered) out.triggered_agents.push_back(m);
    return result.triggered;
  }

  RoundOutcome finish() {
    const std::size_t M = agents.size();
    const std::int64_t copies = env.broadcast_per_agent ? static_cast<std::int64_t>(M) : 1;
    out.ledger.scalars_down = count_scalars(msg) * copies;
    out.episodes_per_agent.reserve(M);
    for (const auto& a : agents) {
      out.episodes_per_agent.push_back(a.episodes());
      out.reports.push_back(a.finalize_report());
      out.ledger.scalars_up += count_scalars(out.reports.back());
    }
    std::sort(out.triggered_agents.begin(), out.triggered_agents.end());
    if (out.triggered_agents.empty()) {
      throw ConsistencyError("round ended without any agent reaching its cap");
    }
    // One signal per triggering agent, plus the server's relay to agents.
    for (std::size_t m : out.triggered_agents) {
      out.ledger.signals += count_scalars(AbortSignal{m, msg.round});
    }
    out.ledger.signals += count_scalars(AbortSignal{}) * copies;
    return std::move(out);
  }
};

}  // namespace

RoundOutcome run_round_synchronous(const BroadcastMessage& msg,
                                   const RoundEnvironment& env) {
  validate(msg, env);
  RoundRunner runner(msg, env);
  bool aborted = false;
  while (!aborted) {
    for (std::size_t m = 0; m < runner.agents.size(); ++m) {
      aborted |= runner.play(m);
    }
  }
  return runner.finish();
}

RoundOutcome run_round_asynchronous(const BroadcastMessage& msg,
                                    const RoundEnvironment& env,
                                    const SpeedProfile& speeds) {
  validate(msg, env);
  const std::size_t M = env.agent_streams.size();
  if (speeds.rates.size() != M) {
    throw std::invalid_argument("speed profile needs one rate per agent");
  }
  for (double r : speeds.rates) {
    if (!(r > 0.0)) throw std::invalid_argument("agent rates must be positive");
  }
  if (!(speeds.latency >= 0.0)) {
    throw std::invalid_argument("abort latency must be nonnegative");
  }

  RoundRunner runner(msg, env);
  std::vector<bool> active(M, true);
  std::vector<std::int64_t> done(M, 0);
  auto next_time = [&](std::size_t m) {
    return static_cast<double>(done[m] + 1) / speeds.rates[m];
  };
  std::optional<double> abort_time;
  std::size_t remaining = M;
  std::vector<std::size_t> batch;
  std::vector<bool> hit(M, false);
  while (remaining > 0) {
    double now = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < M; ++m) {
      if (active[m]) now = std::min(now, next_time(m));
    }
    batch.clear();
    for (std::size_t m = 0; m < M; ++m) {
      if (active[m] && next_time(m) == now) batch.push_back(m);
    }
    for (std::size_t m : batch) {
      hit[m] = runner.play(m);
      ++done[m];
      if (hit[m] && !abort_time) abort_time = now;
    }
    for (std::size_t m : batch) {
      if (hit[m] || (abort_time && now >= *abort_time + speeds.latency)) {
        active[m] = false;
        --remaining;
      }
    }
  }
  return runner.finish();
}

}  // namespace fedq
