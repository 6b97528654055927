#include <doctest.h>

#include <cmath>

#include "fedq/baselines.hpp"
#include "fedq/protocol.hpp"
#include "fedq/server.hpp"

using namespace fedq;

TEST_CASE("first UCB visit") {
  const Dims d{3, 2, 4};
  BonusConfig cfg;
  cfg.c = 0.5;
  SingleAgentState s(d, BonusKind::kHoeffding, cfg, 2.0);
  ucb_step(s, Transition{1, 2, 1, 0.25, 0});
  // alpha_1 = 1 and V_2 starts at H.
  CHECK(std::abs(s.q()(1, 2, 1) - (0.25 + 4.0 + 0.5 * std::sqrt(64.0 * 2.0))) < 1e-12);
  CHECK(s.visits(1, 2, 1) == 1);
  CHECK(s.v()(1, 2) == 4.0);
  CHECK(s.policy()(1, 2) == 1);
  CHECK_THROWS(ucb_step(s, Transition{4, 0, 0, 0.0, 0}));
  CHECK_THROWS(ucb_step(s, Transition{0, 0, 2, 0.0, 0}));
}

TEST_CASE("UCB-B first visit uses half of beta_1") {
  const Dims d{3, 2, 4};
  BonusConfig cfg;
  cfg.c_prime = 0.6;
  SingleAgentState s(d, BonusKind::kBernstein, cfg, 1.0);
  ucb_step(s, Transition{3, 0, 0, 0.4, 1});
  const double beta = bernstein_beta(1, 0.0, 4, 3, 2, 1, cfg, 1.0);
  CHECK(std::abs(s.q()(3, 0, 0) - (0.4 + beta / 2.0)) < 1e-12);
  CHECK(bernstein_per_visit_bonus(1, 0.0, 0.0, d, 1, cfg, 1.0) == doctest::Approx(beta / 2.0));
}

TEST_CASE("UCB values stay in [0, H]") {
  const Dims d{4, 3, 5};
  const auto mdp = generate_random_mdp(21, d);
  for (BonusKind kind : {BonusKind::kHoeffding, BonusKind::kBernstein}) {
    SingleAgentState s(d, kind, {}, 1.0);
    Rng rng(4);
    for (int e = 0; e < 3000; ++e) {
      std::size_t x = rng.below(d.states);
      for (std::size_t h = 0; h < d.horizon; ++h) {
        const std::size_t a = s.policy()(h, x);
        const std::size_t y = sample_next_state(mdp, h, x, a, rng);
        ucb_step(s, Transition{h, x, a, mdp.reward(h, x, a), y});
        x = y;
      }
    }
    for (std::size_t h = 0; h <= d.horizon; ++h) {
      for (std::size_t x = 0; x < d.states; ++x) {
        CHECK(s.v()(h, x) >= 0.0);
        CHECK(s.v()(h, x) <= 5.0);
      }
    }
  }
}

TEST_CASE("one-agent federated rounds of one episode replay as UCB steps") {
  const Dims d{3, 2, 3};
  const auto mdp = generate_random_mdp(8, d);
  const auto init = InitialStateDistribution::uniform(d.states);
  for (auto [variant, kind] : {std::pair{Variant::kHoeffding, BonusKind::kHoeffding},
                               std::pair{Variant::kBernstein, BonusKind::kBernstein}}) {
    BonusConfig cfg;
    cfg.c = 0.3;
    cfg.c_prime = 0.3;
    ServerState fed(d, 1, variant, cfg, 1.0);
    SingleAgentState ucb(d, kind, cfg, 1.0);
    std::vector<Rng> streams{Rng(mix_seed(5, 1))};
    RoundEnvironment env{&mdp, &init, streams, variant, true, true};
    int replayed = 0;
    for (int k = 0; k < 400; ++k) {
      const auto out = run_round_synchronous(fed.broadcast(), env);
      if (out.total_episodes() != 1) break;
      const auto& traj = out.trajectories[0][0];
      for (std::size_t h = 0; h < d.horizon; ++h) {
        const auto& st = traj.steps[h];
        CHECK(st.action == ucb.policy()(h, st.state));
        ucb_step(ucb, Transition{h, st.state, st.action, st.reward, traj.next_state(h)});
      }
      aggregate_round(fed, out.reports);
      ++replayed;
      for (std::size_t i = 0; i < fed.q().raw().size(); ++i) {
        CHECK(std::abs(fed.q().raw()[i] - ucb.q().raw()[i]) < 1e-9);
      }
      CHECK(fed.policy() == ucb.policy());
    }
    CHECK(replayed >= 20);
  }
}
