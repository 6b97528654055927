#include "fedq/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void require_dims(const Dims& d) {
  if (d.states == 0 || d.actions == 0 || d.horizon == 0) {
    throw ConfigError("MDP dimensions must be positive");
  }
}

}  // namespace

TabularMdp::TabularMdp(Dims dims, std::vector<double> transition,
                       std::vector<double> reward)
    : dims_(dims), transition_(std::move(transition)), reward_(std::move(reward)) {
  require_dims(dims_);
  if (transition_.size() != dims_.cells() * dims_.states) {
    throw ConfigError("transition table has wrong size");
  }
  if (reward_.size() != dims_.cells()) {
    throw ConfigError("reward table has wrong size");
  }
  for (std::size_t c = 0; c < dims_.cells(); ++c) {
    double sum = 0.0;
    for (std::size_t y = 0; y < dims_.states; ++y) {
      double p = transition_[c * dims_.states + y];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigError("transition probabilities must be nonnegative");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "transition row " << c << " sums to " << sum;
      throw ConfigError(msg.str());
    }
    double r = reward_[c];
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("rewards must lie in [0, 1]");
    }
  }
}

nlohmann::json TabularMdp::to_json() const {
  const auto [S, A, H] = dims_;
  nlohmann::json transition = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (std::size_t h = 0; h < H; ++h) {
    nlohmann::json th = nlohmann::json::array();
    nlohmann::json rh = nlohmann::json::array();
    for (std::size_t x = 0; x < S; ++x) {
      nlohmann::json tx = nlohmann::json::array();
      nlohmann::json rx = nlohmann::json::array();
      for (std::size_t a = 0; a < A; ++a) {
        auto row = next_state_probs(h, x, a);
        tx.push_back(std::vector<double>(row.begin(), row.end()));
        rx.push_back(this->reward(h, x, a));
      }
      th.push_back(std::move(tx));
      rh.push_back(std::move(rx));
    }
    transition.push_back(std::move(th));
    reward.push_back(std::move(rh));
  }
  return {{"S", S}, {"A", A}, {"H", H},
          {"transition", std::move(transition)}, {"reward", std::move(reward)}};
}

TabularMdp TabularMdp::from_json(const nlohmann::json& j) {
  try {
    Dims d{j.at("S").get<std::size_t>(), j.at("A").get<std::size_t>(),
           j.at("H").get<std::size_t>()};
    require_dims(d);
    const auto& tj = j.at("transition");
    const auto& rj = j.at("reward");
    std::vector<double> transition;
    std::vector<double> reward;
    transition.reserve(d.cells() * d.states);
    reward.reserve(d.cells());
    if (tj.size() != d.horizon || rj.size() != d.horizon) {
      throw ConfigError("environment tables must have H entries");
    }
    for (std::size_t h = 0; h < d.horizon; ++h) {
      if (tj[h].size() != d.states || rj[h].size() != d.states) {
        throw ConfigError("environment tables must have S entries per step");
      }
      for (std::size_t x = 0; x < d.states; ++x) {
        if (tj[h][x].size() != d.actions || rj[h][x].size() != d.actions) {
          throw ConfigError("environment tables must have A entries per state");
        }
        for (std::size_t a = 0; a < d.actions; ++a) {
          const auto& row = tj[h][x][a];
          if (row.size() != d.states) {
            throw ConfigError("transition rows must have S entries");
          }
          for (const auto& p : row) transition.push_back(p.get<double>());
          reward.push_back(rj[h][x][a].get<double>());
        }
      }
    }
    return TabularMdp(d, std::move(transition), std::move(reward));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed environment JSON: ") + e.what());
  }
}

TabularMdp TabularMdp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open environment file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse environment file " + path + ": " + e.what());
  }
  return from_json(j);
}

void TabularMdp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write environment file " + path);
  out << to_json().dump(1) << '\n';
}

ValueTable::ValueTable(std::size_t horizon, std::size_t states, double fill)
    : horizon_(horizon), states_(states), value_((horizon + 1) * states, fill) {
  std::fill(value_.begin() + static_cast<std::ptrdiff_t>(horizon * states),
            value_.end(), 0.0);
}

InitialStateDistribution InitialStateDistribution::fixed(std::size_t state,
                                                         std::size_t S) {
  if (state >= S) throw ConfigError("fixed initial state out of range");
  InitialStateDistribution d;
  d.kind_ = Kind::kFixed;
  d.fixed_ = state;
  d.probs_.assign(S, 0.0);
  d.probs_[state] = 1.0;
  return d;
}

InitialStateDistribution InitialStateDistribution::uniform(std::size_t S) {
  if (S == 0) throw ConfigError("uniform initial state needs S >= 1");
  InitialStateDistribution d;
  d.kind_ = Kind::kUniform;
  d.probs_.assign(S, 1.0 / static_cast<double>(S));
  return d;
}

InitialStateDistribution InitialStateDistribution::custom(
    std::vector<double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ConfigError("initial-state probabilities must be >= 0");
    sum += p;
  }
  if (probs.empty() || std::abs(sum - 1.0) > kRowSumTolerance) {
    throw ConfigError("initial-state probabilities must sum to 1");
  }
  InitialStateDistribution d;
  d.kind_ = Kind::kCustom;
  d.probs_ = std::move(probs);
  return d;
}

std::size_t InitialStateDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::kFixed:
      return fixed_;
    case Kind::kUniform:
      return rng.below(probs_.size());
    case Kind::kCustom: {
      double u = rng.uniform01();
      double acc = 0.0;
      for (std::size_t x = 0; x < probs_.size(); ++x) {
        acc += probs_[x];
        if (u < acc) return x;
      }
      for (std::size_t x = probs_.size(); x-- > 0;) {
        if (probs_[x] > 0.0) return x;
      }
    }
  }
  return 0;
}

TabularMdp generate_random_mdp(std::uint64_t seed, Dims dims) {
  require_dims(dims);
  Rng rng(seed);
  std::vector<double> transition(dims.cells() * dims.states);
  std::vector<double> reward(dims.cells());
  // Draw order: for each (h, x, a), the reward then the S exponentials.
  for (std::size_t c = 0; c < dims.cells(); ++c) {
    reward[c] = rng.uniform01();
    double total = 0.0;
    for (std::size_t y = 0; y < dims.states; ++y) {
      double e = rng.exponential();
      transition[c * dims.states + y] = e;
      total += e;
    }
    for (std::size_t y = 0; y < dims.states; ++y) {
      transition[c * dims.states + y] /= total;
    }
  }
  return TabularMdp(dims, std::move(transition), std::move(reward));
}

std::size_t sample_next_state(const TabularMdp& mdp, std::size_t h,
                              std::size_t x, std::size_t a, Rng& rng) {
  auto probs = mdp.next_state_probs(h, x, a);
  double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t y = 0; y < probs.size(); ++y) {
    acc += probs[y];
    if (u < acc) return y;
  }
  // u landed in the rounding gap above the last partial sum.
  for (std::size_t y = probs.size(); y-- > 0;) {
    if (probs[y] > 0.0) return y;
  }
  return probs.size() - 1;
}

EpisodeTrajectory sample_episode(const TabularMdp& mdp,
                                 const DeterministicPolicy& policy,
                                 std::size_t initial_state, Rng& rng) {
  if (initial_state >= mdp.num_states()) {
    throw std::out_of_range("initial state out of range");
  }
  EpisodeTrajectory traj;
  traj.initial_state = initial_state;
  traj.steps.reserve(mdp.horizon());
  std::size_t x = initial_state;
  for (std::size_t h = 0; h < mdp.horizon(); ++h) {
    std::size_t a = policy(h, x);
    traj.steps.push_back({x, a, mdp.reward(h, x, a)});
    x = sample_next_state(mdp, h, x, a, rng);
  }
  traj.terminal_state = x;
  return traj;
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

double expected_next(const TabularMdp& mdp, const ValueTable& v, std::size_t h,
                     std::size_t x, std::size_t a) {
  auto probs = mdp.next_state_probs(h, x, a);
  auto next = v.row(h + 1);
  double acc = 0.0;
  for (std::size_t y = 0; y < probs.size(); ++y) acc += probs[y] * next[y];
  return acc;
}

}  // namespace

OptimalSolution solve_optimal(const TabularMdp& mdp) {
  const auto& d = mdp.dims();
  OptimalSolution sol{ActionValueTable(d, 0.0), ValueTable(d.horizon, d.states),
                      DeterministicPolicy(d.horizon, d.states)};
  for (std::size_t h = d.horizon; h-- > 0;) {
    for (std::size_t x = 0; x < d.states; ++x) {
      for (std::size_t a = 0; a < d.actions; ++a) {
        sol.q(h, x, a) = mdp.reward(h, x, a) + expected_next(mdp, sol.v, h, x, a);
      }
      std::size_t best = argmax_first(sol.q.actions_at(h, x));
      sol.policy.set(h, x, best);
      sol.v(h, x) = sol.q(h, x, best);
    }
  }
  return sol;
}

ValueTable evaluate_policy(const TabularMdp& mdp,
                           const DeterministicPolicy& policy) {
  const auto& d = mdp.dims();
  ValueTable v(d.horizon, d.states);
  for (std::size_t h = d.horizon; h-- > 0;) {
    for (std::size_t x = 0; x < d.states; ++x) {
      std::size_t a = policy(h, x);
      if (a >= d.actions) throw std::out_of_range("policy action out of range");
      v(h, x) = mdp.reward(h, x, a) + expected_next(mdp, v, h, x, a);
    }
  }
  return v;
}

}  // namespace fedq
