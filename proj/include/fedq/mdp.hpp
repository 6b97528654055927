#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedq/rng.hpp"

namespace fedq {

// Step indices are 0-based throughout: h in [0, H), with value rows
// indexed up to H where row H is the absorbing boundary.
struct Dims {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::size_t horizon = 0;

  std::size_t cells() const { return horizon * states * actions; }
  std::size_t cell(std::size_t h, std::size_t x, std::size_t a) const {
    return (h * states + x) * actions + a;
  }
  bool operator==(const Dims&) const = default;
};

class TabularMdp {
 public:
  // transition is laid out [h][x][a][x'], reward [h][x][a]. Throws
  // ConfigError when a row is not a distribution or a reward leaves [0,1].
  TabularMdp(Dims dims, std::vector<double> transition,
             std::vector<double> reward);

  const Dims& dims() const { return dims_; }
  std::size_t num_states() const { return dims_.states; }
  std::size_t num_actions() const { return dims_.actions; }
  std::size_t horizon() const { return dims_.horizon; }

  std::span<const double> next_state_probs(std::size_t h, std::size_t x,
                                           std::size_t a) const {
    return {transition_.data() + dims_.cell(h, x, a) * dims_.states,
            dims_.states};
  }
  double reward(std::size_t h, std::size_t x, std::size_t a) const {
    return reward_[dims_.cell(h, x, a)];
  }

  nlohmann::json to_json() const;
  static TabularMdp from_json(const nlohmann::json& j);
  static TabularMdp load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const TabularMdp&) const = default;

 private:
  Dims dims_;
  std::vector<double> transition_;
  std::vector<double> reward_;
};

class DeterministicPolicy {
 public:
  DeterministicPolicy() = default;
  DeterministicPolicy(std::size_t horizon, std::size_t states)
      : states_(states), action_(horizon * states, 0) {}

  std::size_t horizon() const { return states_ ? action_.size() / states_ : 0; }
  std::size_t num_states() const { return states_; }
  std::size_t operator()(std::size_t h, std::size_t x) const {
    return action_[h * states_ + x];
  }
  void set(std::size_t h, std::size_t x, std::size_t a) {
    action_[h * states_ + x] = a;
  }
  std::span<const std::size_t> raw() const { return action_; }

  bool operator==(const DeterministicPolicy&) const = default;

 private:
  std::size_t states_ = 0;
  std::vector<std::size_t> action_;
};

// V_h(x) for h in [0, H]; row H stays zero.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(std::size_t horizon, std::size_t states, double fill = 0.0);

  std::size_t horizon() const { return horizon_; }
  std::size_t num_states() const { return states_; }
  double operator()(std::size_t h, std::size_t x) const {
    return value_[h * states_ + x];
  }
  double& operator()(std::size_t h, std::size_t x) {
    return value_[h * states_ + x];
  }
  std::span<const double> row(std::size_t h) const {
    return {value_.data() + h * states_, states_};
  }

 private:
  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::vector<double> value_;
};

class ActionValueTable {
 public:
  ActionValueTable() = default;
  ActionValueTable(Dims dims, double fill)
      : dims_(dims), value_(dims.cells(), fill) {}

  const Dims& dims() const { return dims_; }
  double operator()(std::size_t h, std::size_t x, std::size_t a) const {
    return value_[dims_.cell(h, x, a)];
  }
  double& operator()(std::size_t h, std::size_t x, std::size_t a) {
    return value_[dims_.cell(h, x, a)];
  }
  std::span<const double> actions_at(std::size_t h, std::size_t x) const {
    return {value_.data() + dims_.cell(h, x, 0), dims_.actions};
  }
  std::span<const double> raw() const { return value_; }

 private:
  Dims dims_;
  std::vector<double> value_;
};

struct EpisodeStep {
  std::size_t state;
  std::size_t action;
  double reward;
};

struct EpisodeTrajectory {
  std::size_t initial_state = 0;
  std::vector<EpisodeStep> steps;  // exactly H entries
  std::size_t terminal_state = 0;  // x_{H+1}

  // State reached after step h (x_{h+1}).
  std::size_t next_state(std::size_t h) const {
    return h + 1 < steps.size() ? steps[h + 1].state : terminal_state;
  }
};

struct OptimalSolution {
  ActionValueTable q;
  ValueTable v;
  DeterministicPolicy policy;
};

// Distribution of x_1 for each episode: a fixed state, uniform over S, or an
// explicit probability vector.
class InitialStateDistribution {
 public:
  static InitialStateDistribution fixed(std::size_t state, std::size_t S);
  static InitialStateDistribution uniform(std::size_t S);
  static InitialStateDistribution custom(std::vector<double> probs);

  std::size_t sample(Rng& rng) const;
  std::size_t num_states() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }

 private:
  enum class Kind { kFixed, kUniform, kCustom };
  Kind kind_ = Kind::kUniform;
  std::size_t fixed_ = 0;
  std::vector<double> probs_;
};

// Rewards i.i.d. uniform on [0,1]; each transition row uniform on the
// simplex, drawn as normalized i.i.d. standard exponentials.
TabularMdp generate_random_mdp(std::uint64_t seed, Dims dims);

// Draws x' ~ P_h(. | x, a) by inverse CDF.
std::size_t sample_next_state(const TabularMdp& mdp, std::size_t h,
                              std::size_t x, std::size_t a, Rng& rng);

EpisodeTrajectory sample_episode(const TabularMdp& mdp,
                                 const DeterministicPolicy& policy,
                                 std::size_t initial_state, Rng& rng);

// Backward induction; ties in the argmax go to the smallest action index.
OptimalSolution solve_optimal(const TabularMdp& mdp);

ValueTable evaluate_policy(const TabularMdp& mdp,
                           const DeterministicPolicy& policy);

// Smallest index attaining the maximum of values.
std::size_t argmax_first(std::span<const double> values);

}  // namespace fedq
