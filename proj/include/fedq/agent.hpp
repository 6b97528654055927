#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/protocol.hpp"
#include "fedq/rng.hpp"

namespace fedq {

// Per-agent per-round visit limit max{1, floor(N / (M H (H+1)))}.
std::int64_t visit_cap(std::int64_t prior_visits, std::size_t num_agents,
                       std::size_t H);

// Local statistics of one agent during one round. Holds a reference to the
// round's broadcast, which must outlive it.
class AgentRoundState {
 public:
  AgentRoundState(std::size_t agent, std::size_t num_agents,
                  std::size_t num_actions, const BroadcastMessage& msg,
                  bool track_squares);

  struct EpisodeResult {
    EpisodeTrajectory trajectory;
    bool triggered = false;
  };

  // Plays one episode under the broadcast policy and folds it into the
  // running sums. Throws ConsistencyError if a cell already at its cap is
  // visited again.
  EpisodeResult run_episode_and_check(const TabularMdp& mdp,
                                      std::size_t initial_state, Rng& rng);

  // Means from the running sums, 0 where the count is 0.
  AgentReport finalize_report() const;

  std::size_t agent() const { return agent_; }
  std::int64_t episodes() const { return episodes_; }
  std::int64_t visits(std::size_t h, std::size_t x, std::size_t a) const {
    return counts_[cell(h, x, a)];
  }
  std::int64_t cap(std::size_t h, std::size_t x) const {
    return caps_[h * states_ + x];
  }

 private:
  std::size_t cell(std::size_t h, std::size_t x, std::size_t a) const {
    return (h * states_ + x) * actions_ + a;
  }

  std::size_t agent_;
  std::size_t states_;
  std::size_t actions_;
  std::size_t horizon_;
  const BroadcastMessage* msg_;
  bool track_squares_;
  std::int64_t episodes_ = 0;
  std::vector<std::int64_t> caps_;  // (h, x) under the policy
  std::vector<std::int64_t> counts_;
  std::vector<long double> value_sums_;
  std::vector<long double> square_sums_;
  std::vector<double> rewards_;
};

}  // namespace fedq
