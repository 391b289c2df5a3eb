#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "loralab/dataset.hpp"
#include "loralab/netcore.hpp"
#include "loralab/parallel.hpp"

// Lower-bound instance: a one-dimensional ReLU network whose LoRA update
// turns it into the identity on {0, 1}, fed fair Bernoulli inputs with
// zero labels, together with the random-matrix facts the argument uses.
namespace loralab::adv {

// n samples with X ~ Bernoulli(1/2) on {0, 1} and Y = 0 (d = D = 1).
Dataset sample_assumption_dist(num::RngState& rng, std::size_t n);

// rows x cols matrix with a top-left identity block of size min(rows, cols).
num::Matrix padded_identity(std::size_t rows, std::size_t cols);

// One padded identity per transition dims[t] -> dims[t+1]. Throws
// InvalidArchitecture when some width shrinks.
std::vector<num::Matrix> build_identity_interpolator(std::span<const std::size_t> dims);

// Margin min_t sqrt(d_{t+1}) - sqrt(r) over the hidden layers (t < T).
double eta_star(const net::Architecture& arch);
// 1 / (eta_star - eta); requires 0 < eta < eta_star.
double m_eta(const net::Architecture& arch, double eta);

// 1 + max_t ||W(t)||_op.
double c_pre(const net::PretrainedNet& net);

struct AdversarialInstance {
  net::PretrainedNet net;
  net::LoraAdapter adapter;
  double eta = 0.0;
  double eta_star = 0.0;
  std::optional<double> M_eta;  // unset in square-B mode
  double C_pre = 0.0;
  double residual = 0.0;  // max over x in {0, 1} of |f(x) - x|
  std::vector<double> a_norm;      // ||A(t)||_op
  std::vector<double> b_min_sv;    // s_min(B(t))
  std::vector<double> admissible_limit;  // C_pre / s_min(B(t))
  bool admissibility_holds = true;  // every a_norm <= limit + 1e-8
  bool rank_deficient = false;
  bool square_b = false;
};

// A(t) = pinv(B(t)) (I_pad(t) - W(t)), where I_pad is the padded identity
// for hidden layers and the selector [1 0 ... 0] for the output layer.
// Requires d = D = 1, ReLU, zero biases and B(t) of shape d_{t+1} x r.
// Unless square_b is set, eta must lie in (0, eta_star).
AdversarialInstance construct_adversarial(const net::PretrainedNet& net,
                                          std::vector<num::Matrix> frozen_b, double eta,
                                          bool square_b = false);

struct GordonCheck {
  std::size_t d_out = 0;
  std::size_t r = 0;
  double eta = 0.0;
  double c = 0.5;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  double bound = 0.0;      // 2 exp(-c eta^2)
  double tolerance = 0.0;  // bound + 3 sqrt(bound / trials)
  double mean_s_min = 0.0;
  bool passed = false;
};

// Failure means s_min < sqrt(d_out) - sqrt(r) - eta for a standard
// Gaussian d_out x r matrix. Requires trials >= 1000 and eta > 0.
GordonCheck gordon_verify(std::size_t d_out, std::size_t r, double eta, std::size_t trials,
                          const num::RngState& rng, double c = 0.5,
                          Exec exec = Exec::Parallel);
// Several eta values against one set of draws.
std::vector<GordonCheck> gordon_verify_grid(std::size_t d_out, std::size_t r,
                                            std::span<const double> etas, std::size_t trials,
                                            const num::RngState& rng, double c = 0.5,
                                            Exec exec = Exec::Parallel);

struct UnionGordon {
  std::size_t trials = 0;
  std::size_t layers = 0;
  double failure_rate = 0.0;  // some layer violates its threshold
  double bound = 0.0;         // 2 L exp(-c eta^2), L = number of layers
  double tolerance = 0.0;
  bool passed = false;
};

UnionGordon union_gordon(std::span<const std::size_t> out_dims, std::size_t r, double eta,
                         std::size_t trials, const num::RngState& rng, double c = 0.5,
                         Exec exec = Exec::Parallel);

struct SmallBallEstimate {
  std::size_t N = 0;
  double t = 0.0;
  double p_hat = 0.0;
  double standard_error = 0.0;
  bool exact_available = false;
  std::optional<double> p_exact;
  std::size_t trials = 0;  // 0 for the exact path
};

// sup_v P(|xi_1 + ... + xi_N - v| <= t) for Rademacher xi. Exact by
// binomial enumeration up to this N.
inline constexpr std::size_t kSmallBallExactMax = 4096;
double small_ball_exact(std::size_t N, double t);

// Exact when N <= kSmallBallExactMax and force_mc is false; otherwise Monte
// Carlo over `trials` sums (>= 1000) with v on the integers in [-2t, 2t].
SmallBallEstimate small_ball(std::size_t N, double t, std::size_t trials,
                             const num::RngState& rng, bool force_mc = false,
                             Exec exec = Exec::Parallel);

struct LowerBoundConfig {
  std::size_t T = 1;
  std::size_t W = 16;
  std::size_t r = 4;
  double eta = 1.5;
  double delta = 1.5;
  std::size_t N = 100;
  std::size_t trials = 1000;
  double c = 0.5;
  bool square_b = false;  // r = W test mode: exact identity emulation
  double weight_scale = 1.0;

  net::Architecture arch() const;
  void validate() const;
};

struct LowerBoundReport {
  double eta = 0.0;
  double eta_star = 0.0;
  std::optional<double> M_eta;
  double C_pre = 0.0;
  double residual_max = 0.0;
  double gordon_rate = 0.0;   // trials failing the hidden-layer Gordon event
  double gordon_bound = 0.0;  // 2 (T+1) exp(-c eta^2)
  double smallball_p = 0.0;   // p_2(N)
  double event_frequency = 0.0;
  double event_standard_error = 0.0;
  double theory_floor = 0.0;  // (1 - delta/2)(1 - p_2(N))
  double admissible_frequency = 0.0;
  std::size_t admissibility_violations = 0;
  std::size_t rank_deficient = 0;
  std::size_t N = 0;
  std::size_t trials = 0;
  bool square_b = false;
};

// Per trial: fresh frozen factors, the adversarial adapter, N samples;
// event = (Gordon event holds, or square-B mode) and |R - R^N| > 1/N,
// with the true risk evaluated exactly on {0, 1}.
LowerBoundReport lower_bound_experiment(const LowerBoundConfig& cfg, const num::RngState& rng,
                                        Exec exec = Exec::Parallel);

}  // namespace loralab::adv
