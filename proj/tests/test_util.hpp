#pragma once

#include <cmath>
#include <vector>

#include "fedq/mdp.hpp"
#include "fedq/server.hpp"

namespace fedq {

// Test-only access to ServerState internals for building aggregation
// scenarios directly.
class ServerStateTestAccess {
 public:
  static void set_visits(ServerState& s, std::size_t h, std::size_t x,
                         std::size_t a, std::int64_t n) {
    s.visits_[s.dims_.cell(h, x, a)] = n;
  }
  static void set_q(ServerState& s, std::size_t h, std::size_t x,
                    std::size_t a, double q) {
    s.q_(h, x, a) = q;
  }
  static void set_w(ServerState& s, std::size_t h, std::size_t x,
                    std::size_t a, double w1, double w2) {
    s.w1_[s.dims_.cell(h, x, a)] = w1;
    s.w2_[s.dims_.cell(h, x, a)] = w2;
  }
  static void refresh(ServerState& s) { refresh_value_and_policy(s); }
};

}  // namespace fedq

namespace fedq::testing {

// MDP whose rows are point masses: next state (x + a + h) mod S.
inline TabularMdp deterministic_mdp(Dims d) {
  std::vector<double> transition(d.cells() * d.states, 0.0);
  std::vector<double> reward(d.cells());
  for (std::size_t h = 0; h < d.horizon; ++h) {
    for (std::size_t x = 0; x < d.states; ++x) {
      for (std::size_t a = 0; a < d.actions; ++a) {
        const std::size_t c = d.cell(h, x, a);
        transition[c * d.states + (x + a + h) % d.states] = 1.0;
        reward[c] = 0.1 * static_cast<double>((x + 2 * a + h) % 10);
      }
    }
  }
  return TabularMdp(d, std::move(transition), std::move(reward));
}

// Population variance by two passes in long double.
inline double brute_variance(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  long double mean = 0.0L;
  for (double v : xs) mean += v;
  mean /= static_cast<long double>(xs.size());
  long double acc = 0.0L;
  for (double v : xs) acc += (v - mean) * (v - mean);
  return static_cast<double>(acc / static_cast<long double>(xs.size()));
}

}  // namespace fedq::testing
