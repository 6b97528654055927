#include "fedq/agent.hpp"

#include <sstream>

#include "fedq/errors.hpp"

namespace fedq {

std::int64_t visit_cap(std::int64_t prior_visits, std::size_t num_agents,
                       std::size_t H) {
  const auto denom = static_cast<std::int64_t>(num_agents * H * (H + 1));
  return std::max<std::int64_t>(1, prior_visits / denom);
}

AgentRoundState::AgentRoundState(std::size_t agent, std::size_t num_agents,
                                 std::size_t num_actions,
                                 const BroadcastMessage& msg, bool track_squares)
    : agent_(agent),
      states_(msg.num_states()),
      actions_(num_actions),
      horizon_(msg.horizon()),
      msg_(&msg),
      track_squares_(track_squares),
      caps_(horizon_ * states_),
      counts_(horizon_ * states_ * actions_, 0),
      value_sums_(counts_.size(), 0.0),
      square_sums_(track_squares ? counts_.size() : 0, 0.0),
      rewards_(counts_.size(), 0.0) {
  for (std::size_t i = 0; i < caps_.size(); ++i) {
    caps_[i] = visit_cap(msg.visit_counts[i], num_agents, horizon_);
  }
}

AgentRoundState::EpisodeResult AgentRoundState::run_episode_and_check(
    const TabularMdp& mdp, std::size_t initial_state, Rng& rng) {
  EpisodeResult out;
  out.trajectory = sample_episode(mdp, msg_->policy, initial_state, rng);
  ++episodes_;
  const auto& traj = out.trajectory;
  for (std::size_t h = 0; h < horizon_; ++h) {
    const auto& step = traj.steps[h];
    const std::size_t c = cell(h, step.state, step.action);
    const std::int64_t limit = cap(h, step.state);
    if (counts_[c] >= limit) {
      std::ostringstream msg;
      msg << "agent " << agent_ << " visited (h=" << h << ", x=" << step.state
          << ") beyond its cap " << limit;
      throw ConsistencyError(msg.str());
    }
    ++counts_[c];
    const double next_value = msg_->values(h + 1, traj.next_state(h));
    value_sums_[c] += next_value;
    if (track_squares_) {
      square_sums_[c] += static_cast<long double>(next_value) * next_value;
    }
    rewards_[c] = step.reward;
    if (counts_[c] == limit) out.triggered = true;
  }
  return out;
}

AgentReport AgentRoundState::finalize_report() const {
  AgentReport r;
  r.agent = agent_;
  r.round = msg_->round;
  const std::size_t n = horizon_ * states_;
  r.rewards.assign(n, 0.0);
  r.visit_counts.assign(n, 0);
  r.value_means.assign(n, 0.0);
  if (track_squares_) r.square_means.emplace(n, 0.0);
  for (std::size_t h = 0; h < horizon_; ++h) {
    for (std::size_t x = 0; x < states_; ++x) {
      const std::size_t on = msg_->policy(h, x);
      for (std::size_t a = 0; a < actions_; ++a) {
        if (a != on && counts_[cell(h, x, a)] != 0) {
          throw ConsistencyError("off-policy cell visited");
        }
      }
      const std::size_t c = cell(h, x, on);
      const std::size_t i = h * states_ + x;
      const std::int64_t cnt = counts_[c];
      r.visit_counts[i] = cnt;
      r.rewards[i] = rewards_[c];
      if (cnt > 0) {
        const auto d = static_cast<long double>(cnt);
        r.value_means[i] = static_cast<double>(value_sums_[c] / d);
        if (track_squares_) {
          (*r.square_means)[i] = static_cast<double>(square_sums_[c] / d);
        }
      }
    }
  }
  return r;
}

}  // namespace fedq
