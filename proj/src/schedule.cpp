#include "fedq/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

constexpr double kUnderflowGuard = 1e-300;

// log of prod_{t=t1}^{t2} (t-1)/(H+t) via log-gamma, t1 >= 2.
double log_alpha_c(std::int64_t t1, std::int64_t t2, std::size_t H) {
  const double h = static_cast<double>(H);
  return std::lgamma(static_cast<double>(t2)) -
         std::lgamma(static_cast<double>(t1 - 1)) -
         std::lgamma(h + static_cast<double>(t2) + 1.0) +
         std::lgamma(h + static_cast<double>(t1));
}

}  // namespace

double theory_iota(const BonusConfig& cfg, std::size_t S, std::size_t A,
                   std::size_t H, std::size_t M) {
  const double s = static_cast<double>(S), a = static_cast<double>(A);
  const double h = static_cast<double>(H), m = static_cast<double>(M);
  const double ctilde = 1.0 / (h * (h + 1.0));
  const double t0 = static_cast<double>(cfg.T0);
  const double k0 = static_cast<double>(cfg.K0);
  double iota0 = std::log(2.0 * s * a * (t0 + h * m) * (1.0 + ctilde) / cfg.p);
  double iota1 =
      std::log(2.0 * k0 * s * a * h * (t0 / h + m) * (1.0 + ctilde) / cfg.p);
  return std::max(iota0, iota1);
}

double resolve_iota(const BonusConfig& cfg, std::size_t S, std::size_t A,
                    std::size_t H, std::size_t M) {
  if (!(cfg.c > 0.0) || !(cfg.c_prime > 0.0)) {
    throw ConfigError("bonus constants c and c' must be positive");
  }
  if (cfg.iota) {
    if (!(*cfg.iota > 0.0)) throw ConfigError("iota must be positive");
    return *cfg.iota;
  }
  if (!(cfg.p > 0.0 && cfg.p < 1.0)) throw ConfigError("p must lie in (0, 1)");
  if (cfg.T0 <= 0 || cfg.K0 <= 0) {
    throw ConfigError("theory iota needs positive T0 and K0");
  }
  return theory_iota(cfg, S, A, H, M);
}

double alpha(std::int64_t t, std::size_t H) {
  if (t < 1) throw std::invalid_argument("alpha: t must be >= 1");
  const double h = static_cast<double>(H);
  return (h + 1.0) / (h + static_cast<double>(t));
}

double alpha_c(std::int64_t t1, std::int64_t t2, std::size_t H) {
  if (t1 < 1 || t1 > t2) throw std::invalid_argument("alpha_c: need 1 <= t1 <= t2");
  if (t1 == 1) return 0.0;
  const double h = static_cast<double>(H);
  double prod = 1.0;
  for (std::int64_t t = t1; t <= t2; ++t) {
    prod *= static_cast<double>(t - 1) / (h + static_cast<double>(t));
    if (prod < kUnderflowGuard) return std::exp(log_alpha_c(t1, t2, H));
  }
  return prod;
}

double theta(std::int64_t t, std::int64_t i, std::size_t H) {
  if (i < 0 || i > t) throw std::invalid_argument("theta: need 0 <= i <= t");
  if (i == 0) return t == 0 ? 1.0 : 0.0;
  if (i == t) return alpha(t, H);
  return alpha(i, H) * alpha_c(i + 1, t, H);
}

RoundWeights RoundWeights::compute(std::int64_t t_prev, std::int64_t t_new,
                                   std::size_t H) {
  if (t_prev < 0 || t_new <= t_prev) {
    throw std::invalid_argument("RoundWeights: need 0 <= t_prev < t_new");
  }
  RoundWeights w;
  w.t_prev = t_prev;
  w.t_new = t_new;
  w.per_visit_theta.resize(static_cast<std::size_t>(t_new - t_prev));
  // Walk i = t_new .. t_prev+1 carrying prod_{i' > i} (1 - alpha_{i'}).
  double carry = 1.0;
  for (std::int64_t i = t_new; i > t_prev; --i) {
    const double a = alpha(i, H);
    w.per_visit_theta[static_cast<std::size_t>(i - t_prev - 1)] = a * carry;
    carry *= 1.0 - a;
  }
  w.carry = carry;
  w.alpha_agg = 1.0 - carry;
  return w;
}

double hoeffding_bonus(std::int64_t t, std::size_t H, double c, double iota) {
  if (t < 1) throw std::invalid_argument("hoeffding_bonus: t must be >= 1");
  const double h = static_cast<double>(H);
  return c * std::sqrt(h * h * h * iota / static_cast<double>(t));
}

double hoeffding_round_bonus(const RoundWeights& w, std::size_t H,
                             const BonusConfig& cfg, double iota) {
  double sum = 0.0;
  for (std::size_t j = 0; j < w.per_visit_theta.size(); ++j) {
    std::int64_t t = w.t_prev + 1 + static_cast<std::int64_t>(j);
    sum += w.per_visit_theta[j] * hoeffding_bonus(t, H, cfg.c, iota);
  }
  return 2.0 * sum;
}

double hoeffding_round_bonus(std::int64_t t_prev, std::int64_t t_new,
                             std::size_t H, const BonusConfig& cfg,
                             double iota) {
  return hoeffding_round_bonus(RoundWeights::compute(t_prev, t_new, H), H, cfg,
                               iota);
}

double bernstein_beta(std::int64_t t, double W, std::size_t H, std::size_t S,
                      std::size_t A, std::size_t M, const BonusConfig& cfg,
                      double iota) {
  if (t < 1) throw std::invalid_argument("bernstein_beta: t must be >= 1");
  if (W < 0.0) throw std::invalid_argument("bernstein_beta: W must be >= 0");
  const double h = static_cast<double>(H), s = static_cast<double>(S);
  const double a = static_cast<double>(A), m = static_cast<double>(M);
  const double tt = static_cast<double>(t);
  const double variance_branch =
      std::sqrt(h * iota * (W + h) / tt) +
      iota * (std::sqrt(std::pow(h, 7) * s * a) + std::sqrt(m * s * a * std::pow(h, 6))) / tt;
  const double hoeffding_branch = std::sqrt(h * h * h * iota / tt);
  return cfg.c_prime * std::min(variance_branch, hoeffding_branch);
}

double bernstein_round_bonus(double beta_new, double beta_old,
                             std::int64_t t_prev, std::int64_t t_new,
                             std::size_t H) {
  if (t_prev == 0) return beta_new;
  return beta_new - alpha_c(t_prev + 1, t_new, H) * beta_old;
}

}  // namespace fedq
