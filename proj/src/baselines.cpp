#include "fedq/baselines.hpp"

#include <algorithm>

#include "fedq/server.hpp"

namespace fedq {

SingleAgentState::SingleAgentState(Dims dims, BonusKind kind, BonusConfig cfg,
                                   double iota)
    : dims_(dims),
      kind_(kind),
      cfg_(cfg),
      iota_(iota),
      visits_(dims.cells(), 0),
      q_(dims, static_cast<double>(dims.horizon)),
      v_(dims.horizon, dims.states, static_cast<double>(dims.horizon)),
      policy_(dims.horizon, dims.states),
      w1_(dims.cells(), 0.0),
      w2_(dims.cells(), 0.0) {}

double bernstein_per_visit_bonus(std::int64_t t, double w_before,
                                 double w_after, const Dims& dims,
                                 std::size_t num_agents, const BonusConfig& cfg,
                                 double iota) {
  const auto [S, A, H] = dims;
  const double beta_t = bernstein_beta(t, w_after, H, S, A, num_agents, cfg, iota);
  const double beta_prev =
      t > 1 ? bernstein_beta(t - 1, w_before, H, S, A, num_agents, cfg, iota)
            : 0.0;
  const double a = alpha(t, H);
  return (beta_t - (1.0 - a) * beta_prev) / (2.0 * a);
}

void ucb_step(SingleAgentState& state, const Transition& obs) {
  const auto& d = state.dims_;
  if (obs.h >= d.horizon || obs.x >= d.states || obs.a >= d.actions ||
      obs.next >= d.states) {
    throw std::out_of_range("transition index out of range");
  }
  const std::size_t c = d.cell(obs.h, obs.x, obs.a);
  const std::int64_t t = ++state.visits_[c];
  const double next_value = state.v_(obs.h + 1, obs.next);

  double bonus = 0.0;
  if (state.kind_ == BonusKind::kHoeffding) {
    bonus = hoeffding_bonus(t, d.horizon, state.cfg_.c, state.iota_);
  } else {
    const double w_before = variance_from_sums(state.w1_[c], state.w2_[c], t - 1);
    state.w1_[c] += static_cast<long double>(next_value) * next_value;
    state.w2_[c] += next_value;
    const double w_after = variance_from_sums(state.w1_[c], state.w2_[c], t);
    bonus = bernstein_per_visit_bonus(t, w_before, w_after, d, 1, state.cfg_,
                                      state.iota_);
  }

  const double a = alpha(t, d.horizon);
  double& q = state.q_(obs.h, obs.x, obs.a);
  q = (1.0 - a) * q + a * (obs.reward + next_value + bonus);

  auto qs = state.q_.actions_at(obs.h, obs.x);
  const std::size_t best = argmax_first(qs);
  state.policy_.set(obs.h, obs.x, best);
  state.v_(obs.h, obs.x) = std::min(static_cast<double>(d.horizon), qs[best]);
}

}  // namespace fedq
