#include "loralab/boundcalc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loralab/errors.hpp"

namespace loralab::bound {

void BoundConfig::validate() const {
  arch.validate();
  if (!(M > 0.0) || !std::isfinite(M)) throw InvalidParameter("M must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidParameter("nu must be positive");
  if (!(R0 >= 0.0) || !std::isfinite(R0)) throw InvalidParameter("R0 must be non-negative");
  if (N < 1) throw InvalidParameter("N must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw InvalidParameter("delta must lie in (0, 1]");
  }
  if (!(c2 > 0.0) || !std::isfinite(c2)) throw InvalidParameter("c2 must be positive");
  if (!(loss_lipschitz >= 0.0)) throw InvalidParameter("loss_lipschitz must be non-negative");
  if (c1 && !(*c1 >= 0.0 && *c1 <= c2)) {
    throw InvalidParameter("c1 must satisfy 0 <= c1 <= c2");
  }
}

double epsilon_from_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidParameter("delta must lie in (0, 1]");
  return delta / (1.0 + std::sqrt(1.0 - delta));
}

double compute_R(double M, double nu, std::int64_t r, std::int64_t W, double epsilon) {
  if (!(M > 0.0) || !(nu > 0.0)) throw InvalidParameter("M and nu must be positive");
  if (r < 1 || W < 1) throw InvalidParameter("r and W must be positive");
  const double two_w = 2.0 * static_cast<double>(W);
  if (!(epsilon > 0.0 && epsilon < two_w)) {
    throw InvalidParameter("epsilon must lie in (0, 2W) so that log(2W/epsilon) > 0");
  }
  return M * nu * std::sqrt(2.0 * static_cast<double>(r) * std::log(two_w / epsilon));
}

namespace {

double exponent(const BoundConfig& cfg) { return cfg.c2 * static_cast<double>(cfg.arch.T); }

double radius(const BoundConfig& cfg, double epsilon) {
  return compute_R(cfg.M, cfg.nu, static_cast<std::int64_t>(cfg.arch.r),
                   static_cast<std::int64_t>(cfg.arch.W), epsilon);
}

}  // namespace

double lipschitz_bound(const BoundConfig& cfg, double epsilon) {
  const double e = exponent(cfg);
  const double R = radius(cfg, epsilon);
  return std::pow(2.0, e) * std::pow(R + cfg.R0, e);
}

LipschitzInterval lipschitz_interval(const BoundConfig& cfg, double epsilon) {
  if (!cfg.c1) throw InvalidParameter("lipschitz_interval requires c1");
  const double R = radius(cfg, epsilon);
  const double T = static_cast<double>(cfg.arch.T);
  return {std::pow(2.0, *cfg.c1 * T * (1.0 + std::log2(R + cfg.R0))),
          lipschitz_bound(cfg, epsilon)};
}

double covering_bound_params(double rho, double eps_cov, std::int64_t p) {
  if (!(rho > 0.0) || !(eps_cov > 0.0)) {
    throw InvalidParameter("rho and eps_cov must be positive");
  }
  if (p < 1) throw InvalidParameter("p must be at least 1");
  const double halvings = -std::floor(std::log2(eps_cov));
  return static_cast<double>(p) * (std::log(rho) + halvings * std::log(2.0));
}

double a_term(const BoundConfig& cfg, double epsilon) {
  const double R = radius(cfg, epsilon);
  return (exponent(cfg) + 1.0) * std::log(2.0 * R + 2.0 * cfg.R0);
}

double covering_bound_lora(const BoundConfig& cfg, double epsilon, double eps_cov) {
  if (!(eps_cov > 0.0)) throw InvalidParameter("eps_cov must be positive");
  const auto q = net::count_params(cfg.arch).q_formula;
  return static_cast<double>(q) * (a_term(cfg, epsilon) - std::log(eps_cov));
}

DudleyValue dudley_from_terms(std::int64_t q, double A, std::int64_t N) {
  if (q < 1 || N < 1) throw InvalidParameter("q and N must be positive");
  DudleyValue out;
  out.A = A;
  out.degenerate = !(A > 0.0);
  const double a = std::max(A, 0.0);
  const double qd = static_cast<double>(q);
  const double nd = static_cast<double>(N);
  out.t_star = std::clamp(std::exp(a - nd / (9.0 * qd)), 0.0, 0.5);
  out.rademacher_bound = std::min(2.0, 12.0 * std::sqrt(qd * a) / std::sqrt(nd));
  return out;
}

DudleyValue dudley_value(const BoundConfig& cfg, double epsilon) {
  return dudley_from_terms(net::count_params(cfg.arch).q_formula, a_term(cfg, epsilon),
                           cfg.N);
}

double g_star_from_terms(std::int64_t q, double A, std::int64_t N, double epsilon) {
  if (q < 1 || N < 1) throw InvalidParameter("q and N must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must lie in (0, 1]");
  const double nd = static_cast<double>(N);
  const double a = std::max(A, 0.0);
  const double complexity =
      4.0 * std::min(1.0, 6.0 * std::sqrt(static_cast<double>(q) * a) / std::sqrt(nd));
  return complexity + std::sqrt(8.0 * std::log(2.0 / epsilon) / nd);
}

double BoundReport::covering_log(double eps_cov) const {
  if (!(eps_cov > 0.0)) throw InvalidParameter("eps_cov must be positive");
  return static_cast<double>(q_formula) * (A - std::log(eps_cov));
}

BoundReport generalization_bound(const BoundConfig& cfg) {
  cfg.validate();
  BoundReport rep;
  const auto counts = net::count_params(cfg.arch);
  rep.q_formula = counts.q_formula;
  rep.q_exact = counts.q_exact;
  rep.c2 = cfg.c2;
  rep.epsilon = epsilon_from_delta(cfg.delta);
  rep.R = radius(cfg, rep.epsilon);
  rep.R0 = cfg.R0;
  rep.A = a_term(cfg, rep.epsilon);
  rep.L_lora = lipschitz_bound(cfg, rep.epsilon);
  rep.L_total = loss_curry_lipschitz(cfg.loss_lipschitz) * rep.L_lora;
  const DudleyValue dv = dudley_from_terms(rep.q_formula, rep.A, cfg.N);
  rep.t_star = dv.t_star;
  rep.rademacher_bound = dv.rademacher_bound;
  rep.degenerate = dv.degenerate;
  const double nd = static_cast<double>(cfg.N);
  rep.complexity_term =
      4.0 * std::min(1.0, 6.0 * std::sqrt(static_cast<double>(rep.q_formula) *
                                          std::max(rep.A, 0.0)) /
                              std::sqrt(nd));
  rep.tail_term = std::sqrt(8.0 * std::log(2.0 / rep.epsilon) / nd);
  rep.G_star = rep.complexity_term + rep.tail_term;
  return rep;
}

double loss_curry_lipschitz(double loss_lipschitz) {
  if (!(loss_lipschitz >= 0.0)) throw InvalidParameter("loss Lipschitz constant must be >= 0");
  return loss_lipschitz;
}

}  // namespace loralab::bound
