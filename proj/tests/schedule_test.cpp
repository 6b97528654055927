#include <doctest.h>

#include <cmath>

#include "fedq/rng.hpp"
#include "fedq/schedule.hpp"

using namespace fedq;

TEST_CASE("alpha") {
  for (std::size_t H : {1u, 2u, 5u, 10u}) CHECK(alpha(1, H) == 1.0);
  CHECK(alpha(3, 2) == doctest::Approx(3.0 / 5.0).epsilon(1e-15));
  for (std::int64_t t = 1; t < 100; ++t) CHECK(alpha(t + 1, 4) < alpha(t, 4));
  CHECK_THROWS(alpha(0, 3));
}

TEST_CASE("theta boundary values and hand-computed entries") {
  CHECK(theta(0, 0, 3) == 1.0);
  for (std::int64_t t = 1; t < 10; ++t) CHECK(theta(t, 0, 3) == 0.0);
  // H = 1: alpha_1 = 1, alpha_2 = 2/3.
  CHECK(theta(2, 1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(theta(2, 2, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS(theta(2, 3, 1));
}

TEST_CASE("theta weights sum to one") {
  for (std::size_t H : {1u, 2u, 5u, 10u}) {
    for (std::int64_t t = 1; t <= 300; t += 7) {
      double s = 0.0;
      for (std::int64_t i = 1; i <= t; ++i) s += theta(t, i, H);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("alpha_c") {
  CHECK(alpha_c(1, 1, 3) == 0.0);
  CHECK(alpha_c(1, 50, 3) == 0.0);
  for (std::int64_t t1 = 2; t1 < 20; ++t1) {
    CHECK(alpha_c(t1, t1, 4) == doctest::Approx(1.0 - alpha(t1, 4)).epsilon(1e-15));
  }
  for (std::int64_t t = 2; t < 40; ++t) {
    for (std::int64_t i = 1; i < t; ++i) {
      CHECK(std::abs(theta(t, i, 3) - alpha(i, 3) * alpha_c(i + 1, t, 3)) < 1e-15);
    }
  }
  CHECK_THROWS(alpha_c(5, 4, 2));
}

TEST_CASE("alpha_c falls back to log space without losing accuracy") {
  // Large H and a long range push the running product below 1e-300.
  const double v = alpha_c(2, 2000000, 60);
  CHECK(v >= 0.0);
  CHECK(std::isfinite(v));
  // Moderate range: product and log-gamma routes agree.
  const double direct = alpha_c(10, 5000, 5);
  const double via_log = std::exp(std::lgamma(5000.0) - std::lgamma(9.0) -
                                  std::lgamma(5.0 + 5000.0 + 1.0) +
                                  std::lgamma(5.0 + 10.0));
  CHECK(direct == doctest::Approx(via_log).epsilon(1e-10));
}

TEST_CASE("RoundWeights partition the round's weight") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t H = 1 + rng.below(10);
    const auto t_prev = static_cast<std::int64_t>(rng.below(500));
    const auto t_new = t_prev + 1 + static_cast<std::int64_t>(rng.below(200));
    const auto w = RoundWeights::compute(t_prev, t_new, H);
    double s = 0.0;
    for (std::size_t j = 0; j < w.per_visit_theta.size(); ++j) {
      CHECK(w.per_visit_theta[j] > 0.0);
      CHECK(std::abs(w.per_visit_theta[j] -
                     theta(t_new, t_prev + 1 + static_cast<std::int64_t>(j), H)) < 1e-13);
      s += w.per_visit_theta[j];
    }
    CHECK(std::abs(s - w.alpha_agg) < 1e-12);
    CHECK(std::abs(w.alpha_agg + alpha_c(t_prev + 1, t_new, H) - 1.0) < 1e-12);
  }
  CHECK_THROWS(RoundWeights::compute(3, 3, 2));
}

TEST_CASE("hoeffding_round_bonus") {
  BonusConfig cfg;
  cfg.c = 1.0;
  // theta_1^1 = 1 and b_1 = sqrt(1) so the round bonus is 2.
  CHECK(hoeffding_round_bonus(0, 1, 1, cfg, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(hoeffding_round_bonus(10, 15, 3, cfg, 1.0) > 0.0);
  CHECK_THROWS(hoeffding_round_bonus(4, 4, 3, cfg, 1.0));

  // The full-history bonus sits between 2c sqrt(H^3 iota/t) and twice that.
  for (std::size_t H : {1u, 3u, 5u}) {
    for (std::int64_t t = 1; t <= 400; t += 13) {
      const double beta = hoeffding_round_bonus(0, t, H, cfg, 1.0) / 2.0;
      const double unit = std::sqrt(std::pow(static_cast<double>(H), 3) / t);
      CHECK(beta >= 2.0 * unit / 2.0 - 1e-12);
      CHECK(2.0 * beta <= 4.0 * unit + 1e-12);
      CHECK(2.0 * beta >= 2.0 * unit - 1e-12);
    }
  }
}

TEST_CASE("bernstein_beta") {
  BonusConfig cfg;
  cfg.c_prime = 1.0;
  // min{sqrt(2) + 2, 1} = 1
  CHECK(bernstein_beta(1, 1.0, 1, 1, 1, 1, cfg, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const auto t = static_cast<std::int64_t>(1 + rng.below(100000));
    const double W = rng.uniform01() * 6.25;
    const double b = bernstein_beta(t, W, 5, 3, 2, 10, cfg, 1.0);
    CHECK(b <= std::sqrt(125.0 / static_cast<double>(t)) + 1e-15);
    CHECK(b > 0.0);
  }
  // W = 0 with a huge t: the variance branch wins and decays like t^{-1/2}.
  const double b1 = bernstein_beta(1000000000000LL, 0.0, 5, 3, 2, 10, cfg, 1.0);
  const double b4 = bernstein_beta(4000000000000LL, 0.0, 5, 3, 2, 10, cfg, 1.0);
  CHECK(b1 < std::sqrt(125.0 / 1e12));
  CHECK(b1 / b4 == doctest::Approx(2.0).epsilon(1e-3));
  CHECK_THROWS(bernstein_beta(0, 0.0, 5, 3, 2, 10, cfg, 1.0));
}

TEST_CASE("bernstein_round_bonus equals the unrolled per-visit bonuses") {
  BonusConfig cfg;
  cfg.c_prime = 1.3;
  Rng rng(23);
  const std::size_t S = 3, A = 2, M = 4;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t H = 1 + rng.below(6);
    const auto t_prev = static_cast<std::int64_t>(rng.below(3000));
    const auto t_new = t_prev + 1 + static_cast<std::int64_t>(rng.below(300));
    const double h2 = static_cast<double>(H * H);
    const double w_old = rng.uniform01() * h2 / 4.0;
    const double w_new = rng.uniform01() * h2 / 4.0;
    auto beta = [&](std::int64_t t) {
      if (t == 0) return 0.0;
      return bernstein_beta(t, t <= t_prev ? w_old : w_new, H, S, A, M, cfg, 1.0);
    };
    // b_t = (beta_t - (1 - alpha_t) beta_{t-1}) / (2 alpha_t), summed with
    // weights 2 theta_{t_new}^t over the round.
    double oracle = 0.0;
    for (std::int64_t t = t_prev + 1; t <= t_new; ++t) {
      const double a = alpha(t, H);
      const double b = (beta(t) - (1.0 - a) * beta(t - 1)) / (2.0 * a);
      oracle += 2.0 * theta(t_new, t, H) * b;
    }
    const double got = bernstein_round_bonus(beta(t_new), beta(t_prev), t_prev, t_new, H);
    CHECK(std::abs(got - oracle) < 1e-9);
  }
  CHECK(bernstein_round_bonus(0.7, 123.0, 0, 5, 3) == 0.7);
}

TEST_CASE("Hoeffding-shaped cumulative bonuses reproduce hoeffding_round_bonus") {
  BonusConfig cfg;
  cfg.c = 0.8;
  for (std::size_t H : {1u, 2u, 5u}) {
    // beta_t = 2 sum_i theta_t^i b_i, built directly from theta().
    auto beta = [&](std::int64_t t) {
      double s = 0.0;
      for (std::int64_t i = 1; i <= t; ++i) s += theta(t, i, H) * hoeffding_bonus(i, H, cfg.c, 1.0);
      return 2.0 * s;
    };
    for (std::int64_t t_prev : {0, 1, 7, 40}) {
      for (std::int64_t n : {1, 3, 25}) {
        const double tilde = bernstein_round_bonus(beta(t_prev + n), beta(t_prev),
                                                   t_prev, t_prev + n, H);
        CHECK(std::abs(tilde - hoeffding_round_bonus(t_prev, t_prev + n, H, cfg, 1.0)) < 1e-9);
      }
    }
  }
}

TEST_CASE("theta identities hold on a sample of t") {
  for (std::size_t H : {1u, 2u, 5u, 10u}) {
    const double h = static_cast<double>(H);
    for (std::int64_t t : {1, 2, 3, 10, 57, 400}) {
      double s_sqrt = 0.0, s_sq = 0.0, mx = 0.0;
      for (std::int64_t i = 1; i <= t; ++i) {
        const double th = theta(t, i, H);
        s_sqrt += th / std::sqrt(static_cast<double>(i));
        s_sq += th * th;
        mx = std::max(mx, th);
        if (i < t) {
          CHECK(std::abs(theta(t, i + 1, H) / th - (1.0 + h / static_cast<double>(i))) < 1e-12);
        }
      }
      const double tt = static_cast<double>(t);
      CHECK(s_sqrt >= 1.0 / std::sqrt(tt) - 1e-9);
      CHECK(s_sqrt <= 2.0 / std::sqrt(tt) + 1e-9);
      CHECK(mx <= 2.0 * h / tt + 1e-9);
      CHECK(s_sq <= 2.0 * h / tt + 1e-9);
    }
  }
}

TEST_CASE("iota resolution") {
  BonusConfig cfg;
  CHECK(resolve_iota(cfg, 3, 2, 5, 10) == 1.0);
  cfg.iota.reset();
  cfg.T0 = 1500000;
  cfg.K0 = 30000;
  cfg.p = 0.1;
  const double iota = resolve_iota(cfg, 3, 2, 5, 10);
  const double ct = 1.0 / 30.0;
  const double iota0 = std::log(2.0 * 6.0 * (1500000.0 + 50.0) * (1.0 + ct) / 0.1);
  const double iota1 = std::log(2.0 * 30000.0 * 6.0 * 5.0 * (300000.0 + 10.0) * (1.0 + ct) / 0.1);
  CHECK(iota == doctest::Approx(std::max(iota0, iota1)).epsilon(1e-14));
  cfg.p = 1.0;
  CHECK_THROWS(resolve_iota(cfg, 3, 2, 5, 10));
  cfg.p = 0.1;
  cfg.c = 0.0;
  CHECK_THROWS(resolve_iota(cfg, 3, 2, 5, 10));
}
