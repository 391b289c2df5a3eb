#include "loralab/empiric.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "loralab/boundcalc.hpp"
#include "loralab/errors.hpp"
#include "loralab/kernels.hpp"

namespace loralab::emp {

using net::LoraAdapter;
using net::PretrainedNet;
using num::Matrix;
using num::RngState;
using num::Vector;

double clipped_abs_loss(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) {
    throw InvalidInput("prediction and target lengths differ");
  }
  double sq = 0.0;
  for (std::size_t k = 0; k < prediction.size(); ++k) {
    const double e = prediction[k] - target[k];
    sq += e * e;
  }
  return std::min(1.0, std::sqrt(sq));
}

double mean_of(std::span<const double> losses) {
  if (losses.empty()) throw InvalidInput("cannot average an empty loss list");
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

double empirical_risk(const PretrainedNet& net, const LoraAdapter& adapter,
                      const Dataset& data, Exec exec) {
  if (data.empty()) throw InvalidInput("empirical risk of an empty sample");
  std::vector<double> losses(data.size());
  kernels::sample_losses(net, adapter, data, losses, exec);
  return mean_of(losses);
}

InputLaw input_law_from_name(const std::string& name) {
  if (name == "uniform") return InputLaw::UniformCube;
  if (name == "bernoulli") return InputLaw::BernoulliCoordinates;
  throw InvalidParameter("unknown input law '" + name + "' (expected uniform or bernoulli)");
}

std::string input_law_name(InputLaw law) {
  return law == InputLaw::UniformCube ? "uniform" : "bernoulli";
}

Matrix sample_inputs(RngState& rng, std::size_t n, std::size_t d, InputLaw law) {
  Matrix x(n, d);
  for (double& v : x.entries()) {
    v = law == InputLaw::UniformCube ? rng.uniform() : static_cast<double>(rng.bernoulli());
  }
  return x;
}

Vector SyntheticTask::teacher(std::span<const double> x) const {
  return target ? net::forward_lora(net, *target, x) : net::forward_pretrained(net, x);
}

Dataset SyntheticTask::sample(RngState& rng, std::size_t n) const {
  if (n == 0) throw InvalidParameter("sample size must be at least 1");
  const std::size_t d = net.arch.d;
  const std::size_t D = net.arch.D;
  Matrix xs(n, d);
  Matrix ys(n, D);
  // One sample at a time, so a prefix of a larger draw equals a smaller draw.
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = xs.row(i);
    for (double& v : xi) {
      v = input_law == InputLaw::UniformCube ? rng.uniform()
                                             : static_cast<double>(rng.bernoulli());
    }
    const Vector y = teacher(xi);
    auto yi = ys.row(i);
    for (std::size_t k = 0; k < D; ++k) {
      yi[k] = y[k] + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
    }
  }
  return {std::move(xs), std::move(ys)};
}

LoraAdapter sample_box_adapter(RngState& rng, const LoraAdapter& like,
                               std::optional<double> scale) {
  const double s = scale.value_or(like.box_bound());
  if (!(s >= 0.0) || s > like.box_bound()) {
    throw InvalidParameter("adapter sampling scale must lie in [0, M]");
  }
  LoraAdapter out = like;
  std::vector<Matrix> values = like.trainable();
  for (auto& m : values)
    for (double& v : m.entries()) v = s * (2.0 * rng.uniform() - 1.0);
  out.set_trainable(std::move(values));
  return out;
}

Objective objective_from_name(const std::string& name) {
  if (name == "squared") return Objective::Squared;
  if (name == "clipped") return Objective::Clipped;
  throw InvalidParameter("unknown objective '" + name + "' (expected squared or clipped)");
}

std::string objective_name(Objective objective) {
  return objective == Objective::Squared ? "squared" : "clipped";
}

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidParameter("train.steps must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidParameter("train.learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) throw InvalidParameter("train.batch_size must be at least 1");
  if (!(M > 0.0) || !std::isfinite(M)) throw InvalidParameter("train.M must be positive");
  if (check_every < 1) throw InvalidParameter("train.check_every must be at least 1");
}

namespace {

double objective_at(const Vector& pred, std::span<const double> y, Objective objective) {
  double sq = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double e = pred[k] - y[k];
    sq += e * e;
  }
  return objective == Objective::Squared ? 0.5 * sq : std::min(1.0, std::sqrt(sq));
}

// d objective / d prediction.
Vector objective_grad(const Vector& pred, std::span<const double> y, Objective objective) {
  Vector e(pred.size());
  double sq = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    e[k] = pred[k] - y[k];
    sq += e[k] * e[k];
  }
  if (objective == Objective::Squared) return e;
  const double norm = std::sqrt(sq);
  if (norm >= 1.0 || norm == 0.0) return Vector(pred.size(), 0.0);
  for (double& v : e) v /= norm;
  return e;
}

}  // namespace

double training_objective(const PretrainedNet& net, const LoraAdapter& adapter,
                          const Dataset& data, Objective objective) {
  if (data.empty()) throw InvalidInput("training objective of an empty sample");
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto sample = data[i];
    s += objective_at(net::forward_lora(net, adapter, sample.x), sample.y, objective);
  }
  return s / static_cast<double>(data.size());
}

TrainResult train_projected_sgd(const PretrainedNet& net, LoraAdapter adapter,
                                const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("training set is empty");
  if (cfg.M != adapter.box_bound()) {
    throw InvalidParameter("train.M must equal the adapter's box bound");
  }
  if (data.inputs.cols() != net.arch.d || data.targets.cols() != net.arch.D) {
    throw InvalidInput("dataset shape does not match the architecture");
  }
  RngState rng(cfg.seed, 0x7261696E);
  TrainResult result{adapter, {}, 0};
  LoraAdapter& a = result.adapter;
  a.project();

  const double initial = training_objective(net, a, data, cfg.objective);
  result.objective_trace.push_back(initial);
  auto check = [&](double value, std::size_t step) {
    if (!std::isfinite(value) || (value > 10.0 * initial && value > 1e-12)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step << ": objective " << value
          << " vs initial " << initial;
      throw TrainingDiverged(msg.str());
    }
  };

  const std::size_t n = data.size();
  const std::size_t L = a.layers();
  std::vector<Matrix> acc;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    acc.clear();
    for (std::size_t t = 0; t < L; ++t) {
      acc.emplace_back(a.trainable()[t].rows(), a.trainable()[t].cols());
    }
    for (std::size_t k = 0; k < cfg.batch_size; ++k) {
      const auto sample = data[static_cast<std::size_t>(rng.below(n))];
      const Vector pred = net::forward_lora(net, a, sample.x);
      const Vector up = objective_grad(pred, sample.y, cfg.objective);
      const auto g = net::backprop(net, a, sample.x, up);
      for (std::size_t t = 0; t < L; ++t) acc[t] += g[t];
    }
    const double scale = cfg.learning_rate / static_cast<double>(cfg.batch_size);
    for (std::size_t t = 0; t < L; ++t) {
      auto dst = a.trainable(t).entries();
      const auto src = acc[t].entries();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= scale * src[i];
    }
    a.project();
    result.steps_run = step;
    if (step % cfg.check_every == 0 || step == cfg.steps) {
      const double value = training_objective(net, a, data, cfg.objective);
      result.objective_trace.push_back(value);
      check(value, step);
    }
  }
  return result;
}

RademacherEstimate rademacher_from_table(const Matrix& table, std::size_t n_sign_draws,
                                         const RngState& rng, Exec exec) {
  if (n_sign_draws < 100) throw InvalidParameter("n_sign_draws must be at least 100");
  if (table.empty()) throw InvalidInput("loss table is empty");
  std::vector<double> sups(n_sign_draws);
  kernels::rademacher_sups(table, rng, sups, exec);
  RademacherEstimate out;
  out.sign_draws = n_sign_draws;
  out.functions = table.rows();
  out.mean = mean_of(sups);
  double ss = 0.0;
  for (double s : sups) ss += (s - out.mean) * (s - out.mean);
  const double var = ss / static_cast<double>(n_sign_draws - 1);
  out.standard_error = std::sqrt(var / static_cast<double>(n_sign_draws));
  return out;
}

RademacherEstimate rademacher_mc(const PretrainedNet& net, const LoraAdapter& like,
                                 const std::vector<LoraAdapter>& trained, const Dataset& data,
                                 std::size_t n_sign_draws, std::size_t n_model_draws,
                                 const RngState& rng, Exec exec) {
  if (data.empty()) throw InvalidInput("Rademacher estimate needs at least one sample");
  const std::size_t F = trained.size() + n_model_draws;
  if (F == 0) throw InvalidParameter("Rademacher estimate needs at least one function");
  const RngState model_rng = rng.split(0);
  Matrix table(F, data.size());
  kernels::parallel_for(F, exec, [&](std::size_t f) {
    std::vector<double> losses(data.size());
    if (f < trained.size()) {
      kernels::serial::sample_losses(net, trained[f], data, losses);
    } else {
      RngState stream = model_rng.split(f);
      const LoraAdapter sampled = sample_box_adapter(stream, like);
      kernels::serial::sample_losses(net, sampled, data, losses);
    }
    std::copy(losses.begin(), losses.end(), table.row(f).begin());
  });
  return rademacher_from_table(table, n_sign_draws, rng.split(1), exec);
}

Matrix evaluate_on_grid(const PretrainedNet& net, const std::vector<LoraAdapter>& adapters,
                        const Matrix& grid) {
  if (adapters.empty()) throw InvalidInput("need at least one function sample");
  if (grid.empty()) throw InvalidInput("evaluation grid is empty");
  const std::size_t D = net.arch.D;
  Matrix values(adapters.size(), grid.rows() * D);
  for (std::size_t f = 0; f < adapters.size(); ++f) {
    for (std::size_t g = 0; g < grid.rows(); ++g) {
      const Vector y = net::forward_lora(net, adapters[f], grid.row(g));
      for (std::size_t k = 0; k < D; ++k) values(f, g * D + k) = y[k];
    }
  }
  return values;
}

std::size_t empirical_cover(const Matrix& values, double eps_cov, Exec exec) {
  if (values.empty()) throw InvalidInput("need at least one function sample");
  if (!(eps_cov > 0.0)) throw InvalidParameter("eps_cov must be positive");
  std::vector<double> min_dist(values.rows(), std::numeric_limits<double>::infinity());
  std::size_t centers = 0;
  std::size_t next = 0;
  while (true) {
    ++centers;
    kernels::update_min_distance(values, next, min_dist, exec);
    const auto far = std::max_element(min_dist.begin(), min_dist.end());
    if (*far <= eps_cov) break;
    next = static_cast<std::size_t>(far - min_dist.begin());
  }
  return centers;
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("slope fit: x and y lengths differ");
  std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 3) {
    throw InvalidParameter("slope fit needs at least three distinct abscissae");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw InvalidParameter("slope fit needs positive values on both axes");
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

namespace {

Matrix unit_gaussian(RngState& rng, std::size_t rows, std::size_t cols) {
  Matrix m = num::sample_gaussian(rng, rows, cols, 1.0);
  m *= 1.0 / m.frobenius_norm();
  return m;
}

double pair_norm(const Matrix& a, const Matrix& b) {
  return std::hypot(a.frobenius_norm(), b.frobenius_norm());
}

const std::vector<double> kDefaultRho = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};

LipschitzProbe probe_with_offset(RngState& rng, const Matrix& offset, std::size_t r,
                                 std::span<const double> rho_grid, std::size_t n_probes) {
  if (n_probes < 1) throw InvalidParameter("n_probes must be at least 1");
  std::set<double> distinct(rho_grid.begin(), rho_grid.end());
  if (distinct.size() < 3) throw InvalidParameter("rho grid needs at least three distinct values");
  for (double rho : rho_grid) {
    if (!(rho > 0.0)) throw InvalidParameter("rho values must be positive");
  }
  const std::size_t rows = offset.rows();
  const std::size_t cols = offset.cols();
  const Matrix frozen = num::sample_gaussian(rng, rows, r, 1.0 / std::sqrt(double(r)));

  LipschitzProbe out;
  out.rho.assign(rho_grid.begin(), rho_grid.end());
  out.one_factor.assign(rho_grid.size(), 0.0);
  out.two_factor.assign(rho_grid.size(), 0.0);
  for (std::size_t k = 0; k < n_probes; ++k) {
    // Base direction and perturbation direction, each of unit joint norm.
    Matrix a0 = unit_gaussian(rng, r, cols);
    Matrix b0 = unit_gaussian(rng, rows, r);
    const double base = pair_norm(a0, b0);
    a0 *= 1.0 / base;
    b0 *= 1.0 / base;
    Matrix u = unit_gaussian(rng, r, cols);
    Matrix v = unit_gaussian(rng, rows, r);
    const double dir = pair_norm(u, v);
    u *= 1.0 / dir;
    v *= 1.0 / dir;
    const Matrix u_one = unit_gaussian(rng, r, cols);
    for (std::size_t i = 0; i < rho_grid.size(); ++i) {
      const double rho = rho_grid[i];
      const double h = 1e-6 * std::max(1.0, rho);
      const Matrix a = a0 * (rho / a0.frobenius_norm());
      const Matrix f0 = offset + frozen * a;
      const Matrix f1 = offset + frozen * (a + u_one * h);
      out.one_factor[i] = std::max(out.one_factor[i], (f1 - f0).frobenius_norm() / h);

      const Matrix ab = a0 * rho;
      const Matrix bb = b0 * rho;
      const Matrix g0 = offset + bb * ab;
      const Matrix g1 = offset + (bb + v * h) * (ab + u * h);
      out.two_factor[i] = std::max(out.two_factor[i], (g1 - g0).frobenius_norm() / h);
    }
  }
  out.slope_one_factor = fit_loglog_slope(out.rho, out.one_factor);
  out.slope_two_factor = fit_loglog_slope(out.rho, out.two_factor);
  return out;
}

}  // namespace

LipschitzProbe probe_factor_maps(RngState& rng, std::size_t rows, std::size_t r,
                                 std::size_t cols, std::span<const double> rho_grid,
                                 std::size_t n_probes) {
  if (rows == 0 || r == 0 || cols == 0) throw InvalidParameter("factor shapes must be positive");
  return probe_with_offset(rng, Matrix(rows, cols), r, rho_grid, n_probes);
}

LipschitzProbe lipschitz_probe_asymmetric_vs_full(const PretrainedNet& net, RngState& rng,
                                                  std::size_t n_probes,
                                                  std::span<const double> rho_grid) {
  net.validate();
  if (n_probes < 100) throw InvalidParameter("n_probes must be at least 100");
  const std::size_t layer = net.arch.T >= 2 ? 1 : 0;
  const auto grid = rho_grid.empty() ? std::span<const double>(kDefaultRho) : rho_grid;
  return probe_with_offset(rng, net.weights[layer], net.arch.r, grid, n_probes);
}

void SweepConfig::validate() const {
  arch.validate_shapes();
  if (r_values.empty() || N_values.empty() || seeds.empty()) {
    throw InvalidParameter("sweep grids (r_values, N_values, seeds) must be non-empty");
  }
  for (std::size_t r : r_values) {
    if (r < 1 || r >= arch.W) throw InvalidParameter("every r must satisfy 1 <= r < W");
  }
  for (std::size_t n : N_values) {
    if (n < 1) throw InvalidParameter("every N must be at least 1");
  }
  train.validate();
  if (!(nu > 0.0)) throw InvalidParameter("nu must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidParameter("delta must lie in (0, 1]");
  if (!(c2 > 0.0)) throw InvalidParameter("c2 must be positive");
  if (holdout_size < 1) throw InvalidParameter("holdout_size must be at least 1");
  if (!(weight_scale > 0.0)) throw InvalidParameter("weight_scale must be positive");
  if (!(bias_scale >= 0.0)) throw InvalidParameter("bias_scale must be non-negative");
  if (target_rank < 1) throw InvalidParameter("target_rank must be at least 1");
  if (!(target_scale >= 0.0)) throw InvalidParameter("target_scale must be non-negative");
  if (!(noise_std >= 0.0)) throw InvalidParameter("noise_std must be non-negative");
}

namespace {

// Stream tags under the global seed.
constexpr std::uint64_t kPretrainedStream = 1;
constexpr std::uint64_t kTeacherStream = 2;
constexpr std::uint64_t kTrainDataStream = 3;
constexpr std::uint64_t kHoldoutStream = 4;
constexpr std::uint64_t kFrozenStream = 5;
constexpr std::uint64_t kSgdStream = 6;

}  // namespace

SyntheticTask sweep_task(const SweepConfig& cfg) {
  RngState pre(cfg.seed, kPretrainedStream);
  PretrainedNet net = net::random_pretrained(pre, cfg.arch, cfg.weight_scale, cfg.bias_scale);
  net::Architecture target_arch = cfg.arch;
  target_arch.r = cfg.target_rank;
  std::optional<LoraAdapter> target;
  if (cfg.target_scale > 0.0) {
    RngState teacher_rng(cfg.seed, kTeacherStream);
    const LoraAdapter zero = net::init_adapter(teacher_rng, target_arch, cfg.nu, cfg.target_scale);
    target = sample_box_adapter(teacher_rng, zero);
  }
  return SyntheticTask{std::move(net), std::move(target), cfg.noise_std, cfg.input_law};
}

std::vector<ExperimentRecord> gap_sweep(const SweepConfig& cfg, Exec exec) {
  cfg.validate();
  const SyntheticTask task = sweep_task(cfg);
  const double R0 = task.net.max_abs();
  const std::size_t max_n = *std::max_element(cfg.N_values.begin(), cfg.N_values.end());

  // Shared per-seed data: the training set for N is the first N rows of
  // one draw, and every cell of a seed sees the same holdout.
  std::vector<Dataset> train_pool(cfg.seeds.size());
  std::vector<Dataset> holdout(cfg.seeds.size());
  kernels::parallel_for(cfg.seeds.size(), exec, [&](std::size_t s) {
    RngState data_rng = RngState(cfg.seed, kTrainDataStream).split(cfg.seeds[s]);
    train_pool[s] = task.sample(data_rng, max_n);
    RngState hold_rng = RngState(cfg.seed, kHoldoutStream).split(cfg.seeds[s]);
    holdout[s] = task.sample(hold_rng, cfg.holdout_size);
  });

  struct Cell {
    std::size_t r, N, seed_index;
  };
  std::vector<Cell> cells;
  std::vector<std::size_t> rs = cfg.r_values;
  std::vector<std::size_t> ns = cfg.N_values;
  std::sort(rs.begin(), rs.end());
  std::sort(ns.begin(), ns.end());
  std::vector<std::size_t> seed_order(cfg.seeds.size());
  std::iota(seed_order.begin(), seed_order.end(), 0);
  std::sort(seed_order.begin(), seed_order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.seeds[a] < cfg.seeds[b]; });
  for (std::size_t r : rs)
    for (std::size_t n : ns)
      for (std::size_t s : seed_order) cells.push_back({r, n, s});

  std::vector<ExperimentRecord> records(cells.size());
  kernels::parallel_for(cells.size(), exec, [&](std::size_t c) {
    const auto start = std::chrono::steady_clock::now();
    const Cell& cell = cells[c];
    const std::uint64_t seed = cfg.seeds[cell.seed_index];
    net::Architecture arch = cfg.arch;
    arch.r = cell.r;

    ExperimentRecord rec;
    rec.seed = seed;
    rec.r = cell.r;
    rec.N = cell.N;
    rec.M = cfg.train.M;
    rec.nu = cfg.nu;
    rec.delta = cfg.delta;

    bound::BoundConfig bc;
    bc.arch = arch;
    bc.M = cfg.train.M;
    bc.nu = cfg.nu;
    bc.R0 = R0;
    bc.N = static_cast<std::int64_t>(cell.N);
    bc.delta = cfg.delta;
    bc.c2 = cfg.c2;
    const auto report = bound::generalization_bound(bc);
    rec.q_formula = report.q_formula;
    rec.q_exact = report.q_exact;
    rec.G_star = report.G_star;
    rec.R = report.R;
    rec.A_term = report.A;
    rec.L_lora = report.L_lora;

    RngState frozen_rng = RngState(cfg.seed, kFrozenStream).split(seed).split(cell.r);
    LoraAdapter adapter = net::init_adapter(frozen_rng, arch, cfg.nu, cfg.train.M);
    const Dataset train = train_pool[cell.seed_index].slice(0, cell.N);
    TrainConfig tc = cfg.train;
    tc.seed = num::mix64(RngState(cfg.seed, kSgdStream).split(seed).split(cell.r).split(cell.N)
                             .next_u64());
    try {
      const TrainResult tr = train_projected_sgd(task.net, adapter, train, tc);
      rec.train_risk = empirical_risk(task.net, tr.adapter, train, Exec::Serial);
      rec.holdout_risk = empirical_risk(task.net, tr.adapter, holdout[cell.seed_index],
                                        Exec::Serial);
      rec.gap = std::abs(rec.holdout_risk - rec.train_risk);
      rec.status = "ok";
    } catch (const TrainingDiverged&) {
      rec.train_risk = std::numeric_limits<double>::quiet_NaN();
      rec.holdout_risk = std::numeric_limits<double>::quiet_NaN();
      rec.gap = std::numeric_limits<double>::quiet_NaN();
      rec.status = "diverged";
    }
    if (cfg.record_wallclock) {
      rec.wallclock_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    }
    records[c] = std::move(rec);
  });
  return records;
}

const char* const kSweepCsvHeader =
    "seed,r,N,q_formula,q_exact,M,nu,delta,train_risk,holdout_risk,gap,G_star,R,A_term,"
    "L_lora,wallclock_ms,status";

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::ostringstream out;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.seed << ',' << r.r << ',' << r.N << ',' << r.q_formula << ',' << r.q_exact << ','
        << fmt(r.M) << ',' << fmt(r.nu) << ',' << fmt(r.delta) << ',' << fmt(r.train_risk)
        << ',' << fmt(r.holdout_risk) << ',' << fmt(r.gap) << ',' << fmt(r.G_star) << ','
        << fmt(r.R) << ',' << fmt(r.A_term) << ',' << fmt(r.L_lora) << ','
        << fmt(r.wallclock_ms) << ',' << r.status << '\n';
  }
  return out.str();
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("spearman needs two equal-length series of length >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

DiameterEvent diameter_event_frequency(std::span<const std::size_t> factor_rows, std::size_t r,
                                       std::size_t W, double nu, double M, double epsilon,
                                       std::size_t draws, const RngState& rng, Exec exec) {
  if (draws < 1) throw InvalidParameter("draws must be at least 1");
  if (factor_rows.empty()) throw InvalidParameter("need at least one frozen factor");
  for (std::size_t rows : factor_rows) {
    if (rows < 1) throw InvalidParameter("factor row counts must be positive");
  }
  DiameterEvent out;
  out.draws = draws;
  out.epsilon = epsilon;
  out.R = bound::compute_R(M, nu, static_cast<std::int64_t>(r), static_cast<std::int64_t>(W),
                           epsilon);
  std::vector<unsigned char> hit(draws), hit_signed(draws);
  kernels::parallel_for(draws, exec, [&](std::size_t k) {
    RngState stream = rng.split(k);
    double worst = 0.0, worst_signed = 0.0;
    for (std::size_t rows : factor_rows) {
      const Matrix b = num::sample_gaussian(stream, rows, r, nu);
      for (std::size_t i = 0; i < b.rows(); ++i) {
        double abs_sum = 0.0, sum = 0.0;
        for (double v : b.row(i)) {
          abs_sum += std::abs(v);
          sum += v;
        }
        worst = std::max(worst, M * abs_sum);
        worst_signed = std::max(worst_signed, M * std::abs(sum));
      }
    }
    hit[k] = worst <= out.R;
    hit_signed[k] = worst_signed <= out.R;
  });
  const double n = static_cast<double>(draws);
  out.frequency = static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / n;
  out.frequency_signed =
      static_cast<double>(std::count(hit_signed.begin(), hit_signed.end(), 1)) / n;
  return out;
}

DiameterEvent diameter_event_frequency(const net::Architecture& arch, double nu, double M,
                                       double epsilon, std::size_t draws, const RngState& rng,
                                       Exec exec) {
  arch.validate_shapes();
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < arch.layers(); ++t) rows.push_back(arch.out_dim(t));
  return diameter_event_frequency(rows, arch.r, arch.W, nu, M, epsilon, draws, rng, exec);
}

}  // namespace loralab::emp
