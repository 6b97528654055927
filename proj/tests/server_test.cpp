#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedq/errors.hpp"
#include "fedq/server.hpp"
#include "test_util.hpp"

using namespace fedq;
using Access = ServerStateTestAccess;

namespace {

// Reports that touch only (h, x) under the current policy.
std::vector<AgentReport> single_cell_reports(const ServerState& s, std::size_t h,
                                             std::size_t x, double reward,
                                             const std::vector<std::int64_t>& n,
                                             const std::vector<double>& v,
                                             const std::vector<double>* sq = nullptr) {
  const auto& d = s.dims();
  const std::size_t HS = d.horizon * d.states;
  std::vector<AgentReport> out;
  for (std::size_t m = 0; m < n.size(); ++m) {
    AgentReport r;
    r.agent = m;
    r.round = s.round();
    r.rewards.assign(HS, 0.0);
    r.visit_counts.assign(HS, 0);
    r.value_means.assign(HS, 0.0);
    if (s.variant() == Variant::kBernstein) r.square_means.emplace(HS, 0.0);
    const std::size_t i = h * d.states + x;
    r.visit_counts[i] = n[m];
    if (n[m] > 0) {
      r.rewards[i] = reward;
      r.value_means[i] = v[m];
      if (sq) (*r.square_means)[i] = (*sq)[m];
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("initial server state") {
  const Dims d{3, 2, 5};
  ServerState s(d, 10, Variant::kHoeffding, {}, 1.0);
  CHECK(s.round() == 1);
  CHECK(s.case1_threshold() == 600);
  for (double q : s.q().raw()) CHECK(q == 5.0);
  for (std::size_t h = 0; h < 5; ++h) {
    for (std::size_t x = 0; x < 3; ++x) {
      CHECK(s.v()(h, x) == 5.0);
      CHECK(s.policy()(h, x) == 0);
      for (std::size_t a = 0; a < 2; ++a) CHECK(s.visits(h, x, a) == 0);
    }
  }
  for (std::size_t x = 0; x < 3; ++x) CHECK(s.v()(5, x) == 0.0);
  const auto msg = s.broadcast();
  CHECK(msg.round == 1);
  for (auto n : msg.visit_counts) CHECK(n == 0);
  CHECK_THROWS_AS(ServerState(d, 0, Variant::kHoeffding, {}, 1.0), ConfigError);
}

TEST_CASE("first visit sets Q to reward, next value and full bonus") {
  const Dims d{2, 2, 3};
  BonusConfig cfg;
  cfg.c = 0.5;
  ServerState s(d, 1, Variant::kHoeffding, cfg, 2.0);
  const auto reports = single_cell_reports(s, 1, 0, 0.3, {1}, {1.7});
  const auto agg = aggregate_round(s, reports);
  const double expected = 0.3 + 1.7 + 0.5 * std::sqrt(27.0 * 2.0);
  CHECK(std::abs(s.q()(1, 0, 0) - expected) < 1e-12);
  CHECK(s.visits(1, 0, 0) == 1);
  CHECK(agg.case1_updates == 1);
  CHECK(agg.case2_updates == 0);
  CHECK(agg.cases[1 * 2 + 0] == UpdateCase::kCase1);
  CHECK(s.round() == 2);
}

TEST_CASE("case 1 matches sequential per-visit updates") {
  const Dims d{2, 2, 3};
  const std::size_t M = 5;
  BonusConfig cfg;
  cfg.c = 0.7;
  const double iota = 1.5;
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    ServerState s(d, M, Variant::kHoeffding, cfg, iota);
    const auto t_prev = static_cast<std::int64_t>(rng.below(
        static_cast<std::uint64_t>(s.case1_threshold())));
    const double q0 = rng.uniform01() * 3.0;
    Access::set_visits(s, 0, 1, 0, t_prev);
    Access::set_q(s, 0, 1, 0, q0);
    std::vector<std::int64_t> n(M);
    std::vector<double> v(M);
    for (std::size_t m = 0; m < M; ++m) {
      n[m] = static_cast<std::int64_t>(rng.below(2));
      v[m] = rng.uniform01() * 3.0;
    }
    n[rng.below(M)] = 1;
    const double r = rng.uniform01();
    const auto reports = single_cell_reports(s, 0, 1, r, n, v);

    double q = q0;
    std::int64_t t = t_prev;
    for (std::size_t m = 0; m < M; ++m) {
      if (n[m] == 0) continue;
      ++t;
      const double a = alpha(t, d.horizon);
      const double b = cfg.c * std::sqrt(27.0 * iota / static_cast<double>(t));
      q = (1.0 - a) * q + a * (r + v[m] + b);
    }
    const auto agg = aggregate_round(s, reports);
    CHECK(agg.cases[1] == UpdateCase::kCase1);
    CHECK(std::abs(s.q()(0, 1, 0) - q) < 1e-12);
    CHECK(s.visits(0, 1, 0) == t);
  }
}

TEST_CASE("case 2 uses the mean next value") {
  const Dims d{2, 2, 3};
  const std::size_t M = 3;
  BonusConfig cfg;
  const double iota = 1.0;
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    ServerState s(d, M, Variant::kHoeffding, cfg, iota);
    const std::int64_t t_prev = s.case1_threshold() + static_cast<std::int64_t>(rng.below(5000));
    const double q0 = rng.uniform01() * 3.0;
    Access::set_visits(s, 2, 0, 0, t_prev);
    Access::set_q(s, 2, 0, 0, q0);
    std::vector<std::int64_t> n(M);
    std::vector<double> v(M);
    std::int64_t total = 0;
    double vsum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      n[m] = static_cast<std::int64_t>(rng.below(6));
      v[m] = rng.uniform01() * 3.0;
      total += n[m];
      vsum += static_cast<double>(n[m]) * v[m];
    }
    if (total == 0) {
      n[0] = 2;
      total = 2;
      vsum = 2.0 * v[0];
    }
    const double r = rng.uniform01();
    const auto reports = single_cell_reports(s, 2, 0, r, n, v);
    const std::int64_t t_new = t_prev + total;
    const double carry = alpha_c(t_prev + 1, t_new, d.horizon);
    double bonus = 0.0;
    for (std::int64_t t = t_prev + 1; t <= t_new; ++t) {
      bonus += theta(t_new, t, d.horizon) * hoeffding_bonus(t, d.horizon, cfg.c, iota);
    }
    const double expected = carry * q0 + (1.0 - carry) * (r + vsum / static_cast<double>(total)) + bonus;
    const auto agg = aggregate_round(s, reports);
    CHECK(agg.cases[2 * 2 + 0] == UpdateCase::kCase2);
    CHECK(agg.case2_updates == 1);
    CHECK(std::abs(s.q()(2, 0, 0) - expected) < 1e-10);
  }
}

TEST_CASE("value refresh clips at H and breaks ties to the lowest action") {
  const Dims d{2, 3, 2};
  ServerState s(d, 1, Variant::kHoeffding, {}, 1.0);
  Access::set_q(s, 0, 0, 0, 1.0);
  Access::set_q(s, 0, 0, 1, 7.0);
  Access::set_q(s, 0, 0, 2, 7.0);
  Access::set_q(s, 1, 1, 0, 0.5);
  Access::set_q(s, 1, 1, 1, 0.5);
  Access::set_q(s, 1, 1, 2, 0.25);
  Access::refresh(s);
  CHECK(s.policy()(0, 0) == 1);
  CHECK(s.v()(0, 0) == 2.0);
  CHECK(s.policy()(1, 1) == 0);
  CHECK(s.v()(1, 1) == 0.5);
}

TEST_CASE("termination guard") {
  BonusConfig cfg;
  cfg.T0 = 100;
  cfg.K0 = 2;
  ServerState s(Dims{2, 2, 2}, 1, Variant::kHoeffding, cfg, 1.0);
  CHECK_FALSE(should_terminate(s, 0));
  CHECK_FALSE(should_terminate(s, 99));
  CHECK(should_terminate(s, 100));
  for (int k = 0; k < 2; ++k) {
    aggregate_round(s, single_cell_reports(s, 0, 0, 0.1, {1}, {0.2}));
  }
  CHECK(s.round() == 3);
  CHECK(should_terminate(s, 0));
}

TEST_CASE("variance estimator") {
  CHECK(variance_from_sums(0.0, 0.0, 0) == 0.0);
  CHECK(variance_from_sums(4.0 * 7, 2.0 * 7, 7) == 0.0);
  CHECK(variance_from_sums(1.0 - 1e-12, 1.0, 1) == 0.0);
  CHECK_THROWS_AS(variance_from_sums(0.0, 1.0, 1), ConsistencyError);
  CHECK(variance_from_sums(0.0 + 4.0, 0.0 + 2.0, 2) == doctest::Approx(1.0));
}

TEST_CASE("W tracks the variance of every next value seen") {
  const Dims d{2, 2, 1};
  const std::size_t M = 2;
  ServerState s(d, M, Variant::kBernstein, {}, 1.0);
  Rng rng(31);
  std::vector<double> history;
  for (int k = 0; k < 300; ++k) {
    const bool case1 = s.visits(0, 0, s.policy()(0, 0)) < s.case1_threshold();
    std::vector<std::int64_t> n(M);
    std::vector<double> v(M), sq(M);
    for (std::size_t m = 0; m < M; ++m) {
      n[m] = case1 ? 1 : 1 + static_cast<std::int64_t>(rng.below(4));
      double s1 = 0.0, s2 = 0.0;
      for (std::int64_t j = 0; j < n[m]; ++j) {
        // Values near 1 keep the variance small relative to the mean.
        const double y = 1.0 + 1e-3 * rng.uniform01();
        history.push_back(y);
        s1 += y;
        s2 += y * y;
      }
      v[m] = s1 / static_cast<double>(n[m]);
      sq[m] = s2 / static_cast<double>(n[m]);
    }
    // Keep the policy on action 0 so the history stays in one cell.
    Access::set_q(s, 0, 0, 1, -1.0);
    const auto reports = single_cell_reports(s, 0, 0, 0.5, n, v, &sq);
    aggregate_round(s, reports);
    REQUIRE(s.policy()(0, 0) == 0);
    const double w = compute_w(s, 0, 0, 0);
    const double oracle = testing::brute_variance(history);
    CHECK(std::abs(w - oracle) <= 1e-6 * oracle + 1e-12);
    CHECK(w <= 0.25 * 1.0 + 1e-12);
  }
  CHECK(s.visits(0, 0, 0) == static_cast<std::int64_t>(history.size()));
}

TEST_CASE("aggregation rejects malformed rounds") {
  const Dims d{2, 2, 2};
  ServerState s(d, 2, Variant::kHoeffding, {}, 1.0);
  auto reports = single_cell_reports(s, 0, 0, 0.1, {1, 1}, {0.2, 0.3});
  reports[1].round = 5;
  CHECK_THROWS(aggregate_round(s, reports));
  CHECK_THROWS(aggregate_round(s, std::span(reports).first(1)));

  auto twice = single_cell_reports(s, 0, 0, 0.1, {2, 0}, {0.2, 0.0});
  CHECK_THROWS_AS(aggregate_round(s, twice), ConsistencyError);

  ServerState b(d, 2, Variant::kBernstein, {}, 1.0);
  auto no_sq = single_cell_reports(s, 0, 0, 0.1, {1, 1}, {0.2, 0.3});
  CHECK_THROWS(aggregate_round(b, no_sq));
}

TEST_CASE("Bernstein first visit uses the clamped bonus") {
  const Dims d{3, 2, 4};
  BonusConfig cfg;
  cfg.c_prime = 0.6;
  ServerState s(d, 2, Variant::kBernstein, cfg, 1.0);
  const std::vector<double> sq{0.0, 0.0};
  const auto reports = single_cell_reports(s, 3, 2, 0.4, {1, 0}, {0.0, 0.0}, &sq);
  aggregate_round(s, reports);
  const double beta = bernstein_beta(1, 0.0, 4, 3, 2, 2, cfg, 1.0);
  CHECK(beta == doctest::Approx(0.6 * 8.0));
  CHECK(std::abs(s.q()(3, 2, 0) - (0.4 + beta / 2.0)) < 1e-12);
  CHECK(s.w1(3, 2, 0) == 0.0);
  CHECK(s.w2(3, 2, 0) == 0.0);
  CHECK(compute_w(s, 2, 0, 3) == 0.0);
}

TEST_CASE("snapshot carries the tables") {
  ServerState s(Dims{2, 2, 2}, 1, Variant::kBernstein, {}, 1.0);
  const auto j = s.snapshot();
  CHECK(j.at("round") == 1);
  CHECK(j.at("N").size() == 2);
  CHECK(j.at("Q")[0][1].size() == 2);
  CHECK(j.contains("W1"));
  ServerState h(Dims{2, 2, 2}, 1, Variant::kHoeffding, {}, 1.0);
  CHECK_FALSE(h.snapshot().contains("W1"));
}
