#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/schedule.hpp"

namespace fedq {

enum class BonusKind { kHoeffding, kBernstein };

struct Transition {
  std::size_t h = 0;
  std::size_t x = 0;
  std::size_t a = 0;
  double reward = 0.0;
  std::size_t next = 0;
};

// Single-agent optimistic Q-learning (UCB-H / UCB-B). Q, V and the greedy
// policy are updated after every visit.
class SingleAgentState {
 public:
  SingleAgentState(Dims dims, BonusKind kind, BonusConfig cfg, double iota);

  const Dims& dims() const { return dims_; }
  BonusKind kind() const { return kind_; }
  std::int64_t visits(std::size_t h, std::size_t x, std::size_t a) const {
    return visits_[dims_.cell(h, x, a)];
  }
  const ActionValueTable& q() const { return q_; }
  const ValueTable& v() const { return v_; }
  const DeterministicPolicy& policy() const { return policy_; }
  double w1(std::size_t h, std::size_t x, std::size_t a) const {
    return static_cast<double>(w1_[dims_.cell(h, x, a)]);
  }
  double w2(std::size_t h, std::size_t x, std::size_t a) const {
    return static_cast<double>(w2_[dims_.cell(h, x, a)]);
  }

 private:
  friend void ucb_step(SingleAgentState& state, const Transition& obs);

  Dims dims_;
  BonusKind kind_;
  BonusConfig cfg_;
  double iota_;
  std::vector<std::int64_t> visits_;
  ActionValueTable q_;
  ValueTable v_;
  DeterministicPolicy policy_;
  // Extended precision: W is a difference of nearly equal moments.
  std::vector<long double> w1_;
  std::vector<long double> w2_;
};

// Bernstein per-visit bonus unrolled from the cumulative bonuses:
// b_t = (beta_t - (1 - alpha_t) beta_{t-1}) / (2 alpha_t), with beta_t taken
// at the variance after the visit and beta_{t-1} at the variance before it.
double bernstein_per_visit_bonus(std::int64_t t, double w_before,
                                 double w_after, const Dims& dims,
                                 std::size_t num_agents, const BonusConfig& cfg,
                                 double iota);

// Q(x,a,h) <- (1 - alpha_t) Q + alpha_t (r + V_{h+1}(x') + b_t) at the new
// visit count t, then refreshes V_h(x) and pi_h(x).
void ucb_step(SingleAgentState& state, const Transition& obs);

}  // namespace fedq
