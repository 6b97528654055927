#include "fedq/server.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

constexpr double kVarianceTolerance = 1e-9;

}  // namespace

ServerState::ServerState(Dims dims, std::size_t num_agents, Variant variant,
                         BonusConfig cfg, double iota)
    : dims_(dims),
      num_agents_(num_agents),
      variant_(variant),
      cfg_(cfg),
      iota_(iota),
      visits_(dims.cells(), 0),
      q_(dims, static_cast<double>(dims.horizon)),
      v_(dims.horizon, dims.states, static_cast<double>(dims.horizon)),
      policy_(dims.horizon, dims.states),
      w1_(dims.cells(), 0.0),
      w2_(dims.cells(), 0.0) {
  if (num_agents == 0) throw ConfigError("at least one agent is required");
}

BroadcastMessage ServerState::broadcast() const {
  BroadcastMessage msg;
  msg.round = round_;
  msg.policy = policy_;
  msg.values = v_;
  msg.visit_counts.resize(dims_.horizon * dims_.states);
  for (std::size_t h = 0; h < dims_.horizon; ++h) {
    for (std::size_t x = 0; x < dims_.states; ++x) {
      msg.visit_counts[h * dims_.states + x] = visits(h, x, policy_(h, x));
    }
  }
  return msg;
}

nlohmann::json ServerState::snapshot() const {
  const auto [S, A, H] = dims_;
  nlohmann::json j;
  j["round"] = round_;
  auto per_cell = [&](auto&& get) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t h = 0; h < H; ++h) {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t x = 0; x < S; ++x) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t a = 0; a < A; ++a) row.push_back(get(h, x, a));
        rows.push_back(std::move(row));
      }
      out.push_back(std::move(rows));
    }
    return out;
  };
  j["N"] = per_cell([&](auto h, auto x, auto a) { return visits(h, x, a); });
  j["Q"] = per_cell([&](auto h, auto x, auto a) { return q_(h, x, a); });
  nlohmann::json v = nlohmann::json::array();
  nlohmann::json pi = nlohmann::json::array();
  for (std::size_t h = 0; h < H; ++h) {
    auto r = v_.row(h);
    v.push_back(std::vector<double>(r.begin(), r.end()));
    nlohmann::json prow = nlohmann::json::array();
    for (std::size_t x = 0; x < S; ++x) prow.push_back(policy_(h, x));
    pi.push_back(std::move(prow));
  }
  j["V"] = std::move(v);
  j["policy"] = std::move(pi);
  if (variant_ == Variant::kBernstein) {
    j["W1"] = per_cell([&](auto h, auto x, auto a) { return w1(h, x, a); });
    j["W2"] = per_cell([&](auto h, auto x, auto a) { return w2(h, x, a); });
  }
  return j;
}

double variance_from_sums(long double w1, long double w2, std::int64_t n) {
  if (n == 0) return 0.0;
  const auto d = static_cast<long double>(n);
  const long double mean = w2 / d;
  const auto w = static_cast<double>(w1 / d - mean * mean);
  if (w < -kVarianceTolerance) {
    std::ostringstream msg;
    msg << "variance estimator went negative: " << w;
    throw ConsistencyError(msg.str());
  }
  return std::max(w, 0.0);
}

double compute_w(const ServerState& state, std::size_t x, std::size_t a,
                 std::size_t h) {
  const std::size_t c = state.dims_.cell(h, x, a);
  return variance_from_sums(state.w1_[c], state.w2_[c], state.visits_[c]);
}

void refresh_value_and_policy(ServerState& state) {
  const auto& d = state.dims_;
  const double H = static_cast<double>(d.horizon);
  for (std::size_t h = 0; h < d.horizon; ++h) {
    for (std::size_t x = 0; x < d.states; ++x) {
      auto qs = state.q_.actions_at(h, x);
      const std::size_t best = argmax_first(qs);
      state.policy_.set(h, x, best);
      state.v_(h, x) = std::min(H, qs[best]);
    }
  }
}

AggregatedRound aggregate_round(ServerState& state,
                                std::span<const AgentReport> reports) {
  const auto& d = state.dims_;
  const std::size_t HS = d.horizon * d.states;
  const bool bernstein = state.variant_ == Variant::kBernstein;
  if (reports.size() != state.num_agents_) {
    throw std::invalid_argument("expected one report per agent");
  }
  for (const auto& r : reports) {
    if (r.round != state.round_) {
      throw std::invalid_argument("report round does not match server round");
    }
    if (r.visit_counts.size() != HS || r.value_means.size() != HS ||
        r.rewards.size() != HS) {
      throw std::invalid_argument("report tables have the wrong size");
    }
    if (bernstein && (!r.square_means || r.square_means->size() != HS)) {
      throw std::invalid_argument("Bernstein aggregation needs square means");
    }
  }

  AggregatedRound agg;
  agg.round = state.round_;
  agg.visits.assign(HS, 0);
  agg.value_means.assign(HS, 0.0);
  agg.square_means.assign(HS, 0.0);
  agg.cases.assign(HS, UpdateCase::kUntouched);

  const std::int64_t i0 = state.case1_threshold();
  const std::size_t H = d.horizon;

  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t x = 0; x < d.states; ++x) {
      const std::size_t i = h * d.states + x;
      const std::size_t a = state.policy_(h, x);
      const std::size_t c = d.cell(h, x, a);

      std::int64_t n = 0;
      long double value_sum = 0.0;
      long double square_sum = 0.0;
      double reward = 0.0;
      for (const auto& r : reports) {
        const std::int64_t nm = r.visit_counts[i];
        if (nm < 0) throw ConsistencyError("negative visit count in report");
        if (nm == 0) continue;
        n += nm;
        value_sum += static_cast<long double>(r.value_means[i]) * nm;
        if (bernstein) square_sum += static_cast<long double>((*r.square_means)[i]) * nm;
        reward = r.rewards[i];
      }
      if (n == 0) continue;

      const std::int64_t t_prev = state.visits_[c];
      const std::int64_t t_new = t_prev + n;
      const auto weights = RoundWeights::compute(t_prev, t_new, H);
      const auto vbar = static_cast<double>(value_sum / n);
      agg.visits[i] = n;
      agg.value_means[i] = vbar;
      if (bernstein) agg.square_means[i] = static_cast<double>(square_sum / n);

      double bonus = 0.0;
      if (bernstein) {
        const double w_old = variance_from_sums(state.w1_[c], state.w2_[c], t_prev);
        state.w1_[c] += square_sum;
        state.w2_[c] += value_sum;
        const double w_new = variance_from_sums(state.w1_[c], state.w2_[c], t_new);
        const double beta_new = bernstein_beta(t_new, w_new, H, d.states, d.actions,
                                               state.num_agents_, state.cfg_, state.iota_);
        const double beta_old =
            t_prev > 0 ? bernstein_beta(t_prev, w_old, H, d.states, d.actions,
                                        state.num_agents_, state.cfg_, state.iota_)
                       : 0.0;
        bonus = bernstein_round_bonus(beta_new, beta_old, t_prev, t_new, H);
      } else {
        bonus = hoeffding_round_bonus(weights, H, state.cfg_, state.iota_);
      }

      double& q = state.q_(h, x, a);
      if (t_prev < i0) {
        // Each agent contributed at most one visit; weight them in
        // ascending agent order as consecutive visits.
        double weighted = 0.0;
        std::size_t slot = 0;
        for (const auto& r : reports) {
          const std::int64_t nm = r.visit_counts[i];
          if (nm == 0) continue;
          if (nm > 1) {
            std::ostringstream msg;
            msg << "agent " << r.agent << " reported " << nm
                << " visits to a cell below the case-1 threshold";
            throw ConsistencyError(msg.str());
          }
          weighted += weights.per_visit_theta[slot++] * r.value_means[i];
        }
        q = (1.0 - weights.alpha_agg) * q + weights.alpha_agg * reward +
            weighted + bonus / 2.0;
        agg.cases[i] = UpdateCase::kCase1;
        ++agg.case1_updates;
      } else {
        q = (1.0 - weights.alpha_agg) * q +
            weights.alpha_agg * (reward + vbar) + bonus / 2.0;
        agg.cases[i] = UpdateCase::kCase2;
        ++agg.case2_updates;
      }
      state.visits_[c] = t_new;
    }
  }

  refresh_value_and_policy(state);
  ++state.round_;
  return agg;
}

bool should_terminate(const ServerState& state, std::int64_t completed_steps) {
  return completed_steps >= state.config().T0 || state.round() > state.config().K0;
}

}  // namespace fedq
