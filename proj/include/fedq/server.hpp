#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "fedq/mdp.hpp"
#include "fedq/protocol.hpp"
#include "fedq/schedule.hpp"

namespace fedq {

struct AggregatedRound;

enum class UpdateCase : std::uint8_t { kUntouched, kCase1, kCase2 };

// Global state of the central server. Starts at round 1 with N = 0,
// Q = V = H, W1 = W2 = 0 and the all-zeros policy.
class ServerState {
 public:
  ServerState(Dims dims, std::size_t num_agents, Variant variant,
              BonusConfig cfg, double iota);

  const Dims& dims() const { return dims_; }
  std::size_t num_agents() const { return num_agents_; }
  Variant variant() const { return variant_; }
  const BonusConfig& config() const { return cfg_; }
  double iota() const { return iota_; }
  std::int64_t round() const { return round_; }

  // Visits below this count are aggregated with per-visit weights.
  std::int64_t case1_threshold() const {
    return static_cast<std::int64_t>(2 * num_agents_ * dims_.horizon *
                                     (dims_.horizon + 1));
  }

  std::int64_t visits(std::size_t h, std::size_t x, std::size_t a) const {
    return visits_[dims_.cell(h, x, a)];
  }
  double w1(std::size_t h, std::size_t x, std::size_t a) const {
    return static_cast<double>(w1_[dims_.cell(h, x, a)]);
  }
  double w2(std::size_t h, std::size_t x, std::size_t a) const {
    return static_cast<double>(w2_[dims_.cell(h, x, a)]);
  }
  const ActionValueTable& q() const { return q_; }
  const ValueTable& v() const { return v_; }
  const DeterministicPolicy& policy() const { return policy_; }

  BroadcastMessage broadcast() const;
  nlohmann::json snapshot() const;

 private:
  friend AggregatedRound aggregate_round(ServerState&,
                                                std::span<const AgentReport>);
  friend void refresh_value_and_policy(ServerState&);
  friend double compute_w(const ServerState&, std::size_t, std::size_t,
                          std::size_t);
  friend class ServerStateTestAccess;

  Dims dims_;
  std::size_t num_agents_;
  Variant variant_;
  BonusConfig cfg_;
  double iota_;
  std::int64_t round_ = 1;
  std::vector<std::int64_t> visits_;
  ActionValueTable q_;
  ValueTable v_;
  DeterministicPolicy policy_;
  // Extended precision: W is a difference of nearly equal moments.
  std::vector<long double> w1_;
  std::vector<long double> w2_;
};

// Per (h, x) summary of one aggregation, for the cell a = pi_h^k(x).
struct AggregatedRound {
  std::int64_t round = 0;
  std::vector<std::int64_t> visits;  // n_h^k
  std::vector<double> value_means;   // v_{h+1}^k
  std::vector<double> square_means;  // mu_h^k (Bernstein, else 0)
  std::vector<UpdateCase> cases;
  std::int64_t case1_updates = 0;
  std::int64_t case2_updates = 0;
};

// Folds one round of reports into the server: N, Q (and W1/W2 for the
// Bernstein variant), then V and pi. Advances the round index.
AggregatedRound aggregate_round(ServerState& state,
                                std::span<const AgentReport> reports);

// V_h(x) = min{H, max_a Q_h(x,a)}, pi_h(x) = first argmax.
void refresh_value_and_policy(ServerState& state);

// Loop guard of the server: stop once the steps of completed rounds reach T0
// or the round index exceeds K0.
bool should_terminate(const ServerState& state, std::int64_t completed_steps);

// Sample variance of next-state values recovered from W1, W2 and N; 0 when
// N = 0. Throws ConsistencyError if cancellation drives it below -1e-9.
double compute_w(const ServerState& state, std::size_t x, std::size_t a,
                 std::size_t h);
double variance_from_sums(long double w1, long double w2, std::int64_t n);

}  // namespace fedq
