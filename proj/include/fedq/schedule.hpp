#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace fedq {

// Exploration-bonus constants. iota is either an explicit value or, when
// unset, derived from the step/round budgets by theory_iota().
struct BonusConfig {
  double c = 1.0;        // Hoeffding constant
  double c_prime = 1.0;  // Bernstein constant
  std::optional<double> iota = 1.0;
  double p = 0.1;
  std::int64_t T0 = 0;
  std::int64_t K0 = 0;
};

// max{iota_0, iota_1} for the given problem size; see BonusConfig.
double theory_iota(const BonusConfig& cfg, std::size_t S, std::size_t A,
                   std::size_t H, std::size_t M);

// cfg.iota if set, otherwise theory_iota(). Validates p, c, c'.
double resolve_iota(const BonusConfig& cfg, std::size_t S, std::size_t A,
                    std::size_t H, std::size_t M);

// Learning rate (H+1)/(H+t), t >= 1.
double alpha(std::int64_t t, std::size_t H);

// theta_t^i = alpha_i * prod_{i'=i+1}^{t} (1 - alpha_{i'}), with
// theta_0^0 = 1 and theta_t^0 = 0 for t >= 1.
double theta(std::int64_t t, std::int64_t i, std::size_t H);

// prod_{t=t1}^{t2} (1 - alpha_t); zero whenever t1 == 1.
double alpha_c(std::int64_t t1, std::int64_t t2, std::size_t H);

// Weights of the visits t_prev+1 .. t_new in a round that moves a cell's
// visit count from t_prev to t_new.
struct RoundWeights {
  std::int64_t t_prev = 0;
  std::int64_t t_new = 0;
  std::vector<double> per_visit_theta;  // theta_{t_new}^{t_prev+1..t_new}
  double alpha_agg = 0.0;               // 1 - alpha_c(t_prev+1, t_new)
  double carry = 1.0;                   // alpha_c(t_prev+1, t_new)

  static RoundWeights compute(std::int64_t t_prev, std::int64_t t_new,
                              std::size_t H);
};

// Per-visit Hoeffding bonus c * sqrt(H^3 iota / t).
double hoeffding_bonus(std::int64_t t, std::size_t H, double c, double iota);

// 2 * sum_{t=t_prev+1}^{t_new} theta_{t_new}^t * b_t.
double hoeffding_round_bonus(std::int64_t t_prev, std::int64_t t_new,
                             std::size_t H, const BonusConfig& cfg,
                             double iota);
double hoeffding_round_bonus(const RoundWeights& w, std::size_t H,
                             const BonusConfig& cfg, double iota);

// Variance-aware cumulative bonus beta_t(W), clamped by the Hoeffding-shaped
// branch c' sqrt(H^3 iota / t). M enters the lower-order term.
double bernstein_beta(std::int64_t t, double W, std::size_t H, std::size_t S,
                      std::size_t A, std::size_t M, const BonusConfig& cfg,
                      double iota);

// beta_new - alpha_c(t_prev+1, t_new) * beta_old; beta at t = 0 is 0.
double bernstein_round_bonus(double beta_new, double beta_old,
                             std::int64_t t_prev, std::int64_t t_new,
                             std::size_t H);

}  // namespace fedq
