#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loralab/dataset.hpp"
#include "loralab/netcore.hpp"
#include "loralab/parallel.hpp"

namespace loralab::emp {

// min(1, ||prediction - target||_2). Reduces to the clipped absolute
// difference when D = 1.
double clipped_abs_loss(std::span<const double> prediction, std::span<const double> target);

// Mean of the clipped loss over the dataset. Per-sample losses may be
// computed in parallel; the sum is always taken in index order.
double empirical_risk(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                      const Dataset& data, Exec exec = Exec::Parallel);
double mean_of(std::span<const double> losses);

enum class InputLaw { UniformCube, BernoulliCoordinates };
InputLaw input_law_from_name(const std::string& name);
std::string input_law_name(InputLaw law);

// Teacher-student regression task. Labels are teacher(x) + N(0, noise_std^2)
// per coordinate, where the teacher is the pretrained net perturbed by a
// hidden target adapter (or the bare net when there is none).
struct SyntheticTask {
  net::PretrainedNet net;
  std::optional<net::LoraAdapter> target;
  double noise_std = 0.0;
  InputLaw input_law = InputLaw::UniformCube;

  Dataset sample(num::RngState& rng, std::size_t n) const;
  num::Vector teacher(std::span<const double> x) const;
};

// Inputs only (targets zero-filled): n points from the law on [0,1]^d.
num::Matrix sample_inputs(num::RngState& rng, std::size_t n, std::size_t d, InputLaw law);

// Copy of `like` (sharing its frozen factor) with trainable entries drawn
// uniformly from [-scale, scale]; scale defaults to the box bound.
net::LoraAdapter sample_box_adapter(num::RngState& rng, const net::LoraAdapter& like,
                                    std::optional<double> scale = std::nullopt);

enum class Objective { Squared, Clipped };
Objective objective_from_name(const std::string& name);
std::string objective_name(Objective objective);

struct TrainConfig {
  std::size_t steps = 1000;
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  double M = 1.0;
  std::uint64_t seed = 0;
  // Squared is 0.5 ||f(x) - y||^2; Clipped is the reporting loss itself.
  Objective objective = Objective::Squared;
  // Full-data objective is recorded (and checked for divergence) this often.
  std::size_t check_every = 100;

  void validate() const;
};

struct TrainResult {
  net::LoraAdapter adapter;
  std::vector<double> objective_trace;  // step 0, every check_every steps, final
  std::size_t steps_run = 0;
};

// Mean training objective over the full dataset.
double training_objective(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                          const Dataset& data, Objective objective);

// Minibatch SGD on the trainable factor, clamped to [-M, M] after every
// step. cfg.M must equal the adapter's box bound. Throws TrainingDiverged
// when the objective becomes non-finite or exceeds ten times its initial
// value.
TrainResult train_projected_sgd(const net::PretrainedNet& net, net::LoraAdapter adapter,
                                const Dataset& data, const TrainConfig& cfg);

struct RademacherEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t sign_draws = 0;
  std::size_t functions = 0;
};

// E_sigma sup_f (1/m) sum_i sigma_i table(f, i) by Monte Carlo over sign
// vectors; the sup runs over the finite rows of the table, so this is a
// lower estimate for any larger class. Requires n_sign_draws >= 100.
RademacherEstimate rademacher_from_table(const num::Matrix& table, std::size_t n_sign_draws,
                                         const num::RngState& rng, Exec exec = Exec::Parallel);

// Loss table over `trained` plus n_model_draws adapters sampled uniformly
// in the box (sharing the frozen factor of `like`), then the estimate above.
RademacherEstimate rademacher_mc(const net::PretrainedNet& net, const net::LoraAdapter& like,
                                 const std::vector<net::LoraAdapter>& trained,
                                 const Dataset& data, std::size_t n_sign_draws,
                                 std::size_t n_model_draws, const num::RngState& rng,
                                 Exec exec = Exec::Parallel);

// Row f holds adapter f evaluated on every grid point (all D outputs).
num::Matrix evaluate_on_grid(const net::PretrainedNet& net,
                             const std::vector<net::LoraAdapter>& adapters,
                             const num::Matrix& grid);

// Greedy farthest-point cover of the rows of `values` under the sup norm:
// returns the number of centers needed so every row is within eps_cov of one.
std::size_t empirical_cover(const num::Matrix& values, double eps_cov,
                            Exec exec = Exec::Parallel);

// Least-squares slope of log(y) against log(x). Throws InvalidParameter
// with fewer than three distinct x values or non-positive entries.
double fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct LipschitzProbe {
  std::vector<double> rho;
  std::vector<double> one_factor;  // A -> W + B0 A
  std::vector<double> two_factor;  // (A, B) -> W + B A
  double slope_one_factor = 0.0;
  double slope_two_factor = 0.0;
};

// Local Lipschitz estimates of the two factor maps for a (rows x r) by
// (r x cols) factorization, at base points of Frobenius norm rho, by finite
// differences along random directions (largest ratio over the probes).
LipschitzProbe probe_factor_maps(num::RngState& rng, std::size_t rows, std::size_t r,
                                 std::size_t cols, std::span<const double> rho_grid,
                                 std::size_t n_probes);

// Same probe on the shapes and weights of one hidden layer of `net`
// (rank taken from net.arch.r). Requires n_probes >= 100.
LipschitzProbe lipschitz_probe_asymmetric_vs_full(const net::PretrainedNet& net,
                                                  num::RngState& rng, std::size_t n_probes,
                                                  std::span<const double> rho_grid = {});

struct SweepConfig {
  net::Architecture arch;  // r is replaced per cell
  std::vector<std::size_t> r_values;
  std::vector<std::size_t> N_values;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;  // train.seed is ignored; each cell derives its own
  double nu = 1.0;
  double delta = 0.05;
  double c2 = 1.0;
  std::size_t holdout_size = 10000;
  double weight_scale = 1.0;  // pretrained weights ~ N(0, (scale^2)/fan_in)
  double bias_scale = 0.0;
  std::size_t target_rank = 1;  // rank of the hidden target adapter
  double target_scale = 0.5;    // its trainable entries ~ U[-scale, scale]
  double noise_std = 0.1;
  InputLaw input_law = InputLaw::UniformCube;
  bool record_wallclock = false;
  std::uint64_t seed = 0;  // global seed: pretrained net and teacher

  void validate() const;
};

struct ExperimentRecord {
  std::uint64_t seed = 0;
  std::size_t r = 0;
  std::size_t N = 0;
  std::int64_t q_formula = 0;
  std::int64_t q_exact = 0;
  double M = 0.0;
  double nu = 0.0;
  double delta = 0.0;
  double train_risk = 0.0;
  double holdout_risk = 0.0;
  double gap = 0.0;
  double G_star = 0.0;
  double R = 0.0;
  double A_term = 0.0;
  double L_lora = 0.0;
  double wallclock_ms = 0.0;
  std::string status = "ok";  // ok | diverged
};

// Builds the pretrained net and the teacher for a sweep from its global seed.
SyntheticTask sweep_task(const SweepConfig& cfg);

// One record per (r, N, seed), sorted by (r, N, seed). Cells run in
// parallel; inputs, holdout and the student's frozen factor are shared
// across cells through common random streams so that comparisons along
// r and N are paired.
std::vector<ExperimentRecord> gap_sweep(const SweepConfig& cfg, Exec exec = Exec::Parallel);

extern const char* const kSweepCsvHeader;
std::string records_to_csv(const std::vector<ExperimentRecord>& records);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct DiameterEvent {
  std::size_t draws = 0;
  double R = 0.0;
  double epsilon = 0.0;
  double frequency = 0.0;        // max_i M sum_k |B_ik| <= R (true worst case over the box)
  double frequency_signed = 0.0;  // max_i M |sum_k B_ik| <= R
};

// Over `draws` samples of frozen factors with the given row counts (each
// rows x r, entries N(0, nu^2)), frequency with which the worst-case entry
// of B A over the box stays within R = M nu sqrt(2 r log(2W / epsilon)).
DiameterEvent diameter_event_frequency(std::span<const std::size_t> factor_rows, std::size_t r,
                                       std::size_t W, double nu, double M, double epsilon,
                                       std::size_t draws, const num::RngState& rng,
                                       Exec exec = Exec::Parallel);
// Every layer of `arch`.
DiameterEvent diameter_event_frequency(const net::Architecture& arch, double nu, double M,
                                       double epsilon, std::size_t draws,
                                       const num::RngState& rng, Exec exec = Exec::Parallel);

}  // namespace loralab::emp
