#pragma once

#include <cstdint>
#include <optional>

#include "loralab/netcore.hpp"

// Closed-form evaluation of the high-probability upper bound on the LoRA
// generalization gap and every intermediate quantity it is built from.
//
// Two different epsilons appear here: `epsilon` is a failure probability
// (concentration of the frozen factor), `eps_cov` is a covering radius.
// All logarithms are natural except the floor(log2) in the parameter-ball
// covering count.
namespace loralab::bound {

struct BoundConfig {
  net::Architecture arch;
  double M = 1.0;        // box bound on trainable entries
  double nu = 1.0;       // std of the frozen factor
  double R0 = 1.0;       // max |theta_pre|
  std::int64_t N = 1;    // sample count
  double delta = 0.05;   // failure probability, (0, 1]
  double c2 = 1.0;       // Lipschitz-width constant (upper)
  double loss_lipschitz = 1.0;
  std::optional<double> c1;  // optional lower Lipschitz-width constant

  void validate() const;
};

// epsilon = 1 - sqrt(1 - delta), evaluated as delta / (1 + sqrt(1 - delta)).
double epsilon_from_delta(double delta);

// R = M nu sqrt(2 r log(2W / epsilon)); requires 0 < epsilon < 2W.
double compute_R(double M, double nu, std::int64_t r, std::int64_t W, double epsilon);

// Upper bound 2^{c2 T} (R + R0)^{c2 T} on the parameter-to-function
// Lipschitz constant.
double lipschitz_bound(const BoundConfig& cfg, double epsilon);

struct LipschitzInterval {
  double lower;  // 2^{c1 T (1 + log2(R + R0))}
  double upper;  // 2^{c2 T} (R + R0)^{c2 T}
};
// Requires cfg.c1 to be set and 0 <= c1 <= c2.
LipschitzInterval lipschitz_interval(const BoundConfig& cfg, double epsilon);

// log of (rho 2^{-floor(log2 eps_cov)})^p.
double covering_bound_params(double rho, double eps_cov, std::int64_t p);

// log of ((2R + 2R0)^{c2 T + 1} / eps_cov)^q with q = q_formula.
double covering_bound_lora(const BoundConfig& cfg, double epsilon, double eps_cov);

// A = (c2 T + 1) log(2R + 2R0).
double a_term(const BoundConfig& cfg, double epsilon);

struct DudleyValue {
  double A = 0.0;
  double t_star = 0.0;            // optimal entropy-integral cutoff, clamped to [0, 1/2]
  double rademacher_bound = 0.0;  // min(2, 12 sqrt(q A) / sqrt(N))
  bool degenerate = false;        // A <= 0; max(A, 0) was used
};

DudleyValue dudley_from_terms(std::int64_t q, double A, std::int64_t N);
DudleyValue dudley_value(const BoundConfig& cfg, double epsilon);

// G* = 4 min(1, 6 sqrt(q A) / sqrt(N)) + sqrt(8 log(2 / epsilon) / N).
double g_star_from_terms(std::int64_t q, double A, std::int64_t N, double epsilon);

struct BoundReport {
  double epsilon = 0.0;
  double R = 0.0;
  double R0 = 0.0;
  double A = 0.0;
  double L_lora = 0.0;
  double L_total = 0.0;  // loss Lipschitz constant times L_lora
  double t_star = 0.0;
  double rademacher_bound = 0.0;
  double complexity_term = 0.0;  // 4 min(1, 6 sqrt(qA)/sqrt(N))
  double tail_term = 0.0;        // sqrt(8 log(2/epsilon)/N)
  double G_star = 0.0;
  double c2 = 1.0;
  bool degenerate = false;
  std::int64_t q_formula = 0;
  std::int64_t q_exact = 0;

  // log covering number bound of the LoRA class at radius eps_cov.
  double covering_log(double eps_cov) const;
};

BoundReport generalization_bound(const BoundConfig& cfg);

// Lipschitz constant of f -> loss(f(.), .): equal to the loss's constant.
double loss_curry_lipschitz(double loss_lipschitz);

}  // namespace loralab::bound
