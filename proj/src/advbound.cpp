#include "loralab/advbound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "loralab/errors.hpp"
#include "loralab/kernels.hpp"

namespace loralab::adv {

using net::Architecture;
using net::PretrainedNet;
using num::Matrix;
using num::RngState;

Dataset sample_assumption_dist(RngState& rng, std::size_t n) {
  if (n < 1) throw InvalidParameter("sample size must be at least 1");
  Matrix x(n, 1);
  for (double& v : x.entries()) v = static_cast<double>(rng.bernoulli());
  return {std::move(x), Matrix(n, 1)};
}

Matrix padded_identity(std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
  return m;
}

std::vector<Matrix> build_identity_interpolator(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw InvalidArchitecture("layer schedule needs at least two widths");
  std::vector<Matrix> out;
  for (std::size_t t = 0; t + 1 < dims.size(); ++t) {
    if (dims[t] == 0) throw InvalidArchitecture("layer widths must be positive");
    if (dims[t + 1] < dims[t]) {
      throw InvalidArchitecture("width shrinks from " + std::to_string(dims[t]) + " to " +
                                std::to_string(dims[t + 1]) + " at layer " +
                                std::to_string(t) + "; the identity cannot be padded");
    }
    out.push_back(padded_identity(dims[t + 1], dims[t]));
  }
  return out;
}

double eta_star(const Architecture& arch) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < arch.T; ++t) {
    m = std::min(m, std::sqrt(static_cast<double>(arch.out_dim(t))));
  }
  return m - std::sqrt(static_cast<double>(arch.r));
}

double m_eta(const Architecture& arch, double eta) {
  const double star = eta_star(arch);
  if (!(star > 0.0)) throw InvalidParameter("eta* is not positive: need r < W");
  if (!(eta > 0.0 && eta < star)) {
    throw InvalidParameter("eta must lie in (0, eta*) with eta* = " + std::to_string(star));
  }
  return 1.0 / (star - eta);
}

double c_pre(const PretrainedNet& net) {
  double m = 0.0;
  for (const auto& w : net.weights) m = std::max(m, num::svd(w).singular_values.front());
  return 1.0 + m;
}

AdversarialInstance construct_adversarial(const PretrainedNet& net, std::vector<Matrix> frozen_b,
                                          double eta, bool square_b) {
  net.validate();
  const Architecture& arch = net.arch;
  if (arch.d != 1 || arch.D != 1) throw InvalidArchitecture("lower-bound network needs d = D = 1");
  if (arch.activation.kind != net::ActivationKind::ReLU) {
    throw InvalidArchitecture("lower-bound network needs the ReLU activation");
  }
  for (const auto& b : net.biases)
    for (double v : b)
      if (v != 0.0) throw InvalidArchitecture("lower-bound network needs zero biases");
  if (frozen_b.size() != arch.layers()) {
    throw InvalidInput("need one frozen factor per layer");
  }
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    if (frozen_b[t].rows() != arch.out_dim(t) || frozen_b[t].cols() != arch.r) {
      throw InvalidInput("frozen factor " + std::to_string(t) + " has the wrong shape");
    }
  }

  const double pre = c_pre(net);
  std::vector<Matrix> a_factors;
  std::vector<double> a_norm, b_min_sv, limits;
  bool admissible = true;
  bool rank_deficient = false;
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    const Matrix& b = frozen_b[t];
    const auto bsvd = num::svd(b);
    const double s_max = bsvd.singular_values.front();
    const double s_min = bsvd.singular_values.back();
    const double tol = static_cast<double>(std::max(b.rows(), b.cols())) *
                       std::numeric_limits<double>::epsilon() * s_max;
    if (!(s_min > tol)) rank_deficient = true;

    Matrix target = padded_identity(arch.out_dim(t), arch.in_dim(t));
    target -= net.weights[t];
    Matrix a = num::pinv(b) * target;
    const double norm = num::svd(a).singular_values.front();
    const double limit = pre / s_min;
    if (!(norm <= limit + 1e-8)) admissible = false;
    a_norm.push_back(norm);
    b_min_sv.push_back(s_min);
    limits.push_back(limit);
    a_factors.push_back(std::move(a));
  }
  double box = 0.0;
  for (const auto& a : a_factors) box = std::max(box, a.max_abs());

  AdversarialInstance inst{
      .net = net,
      .adapter = net::LoraAdapter(arch, std::move(frozen_b), std::move(a_factors),
                                  box > 0.0 ? box : 1.0, 1.0),
      .eta = eta,
      .eta_star = square_b ? 0.0 : eta_star(arch),
      .M_eta = square_b ? std::nullopt : std::optional<double>(m_eta(arch, eta)),
      .C_pre = pre,
      .residual = 0.0,
      .a_norm = std::move(a_norm),
      .b_min_sv = std::move(b_min_sv),
      .admissible_limit = std::move(limits),
      .admissibility_holds = admissible,
      .rank_deficient = rank_deficient,
      .square_b = square_b,
  };
  for (double x : {0.0, 1.0}) {
    const double y = net::forward_lora(net, inst.adapter, std::span<const double>(&x, 1))[0];
    inst.residual = std::max(inst.residual, std::abs(y - x));
  }
  return inst;
}

namespace {

constexpr double kEventSlack = 1e-8;

void check_trials(std::size_t trials) {
  if (trials < 1000) throw InvalidParameter("trials must be at least 1000");
}

void finish(GordonCheck& g, const std::vector<double>& s_min) {
  const double threshold = std::sqrt(static_cast<double>(g.d_out)) -
                           std::sqrt(static_cast<double>(g.r)) - g.eta;
  g.failures = static_cast<std::size_t>(
      std::count_if(s_min.begin(), s_min.end(), [&](double s) { return s < threshold; }));
  g.failure_rate = static_cast<double>(g.failures) / static_cast<double>(g.trials);
  g.bound = 2.0 * std::exp(-g.c * g.eta * g.eta);
  g.tolerance = g.bound + 3.0 * std::sqrt(g.bound / static_cast<double>(g.trials));
  double sum = 0.0;
  for (double s : s_min) sum += s;
  g.mean_s_min = sum / static_cast<double>(s_min.size());
  g.passed = g.failure_rate <= g.tolerance;
}

}  // namespace

std::vector<GordonCheck> gordon_verify_grid(std::size_t d_out, std::size_t r,
                                            std::span<const double> etas, std::size_t trials,
                                            const RngState& rng, double c, Exec exec) {
  check_trials(trials);
  if (d_out == 0 || r == 0) throw InvalidParameter("d_out and r must be positive");
  if (!(c > 0.0)) throw InvalidParameter("Gordon constant c must be positive");
  for (double eta : etas) {
    if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
  }
  std::vector<double> s_min(trials);
  kernels::smallest_singular_values(d_out, r, rng, s_min, exec);
  std::vector<GordonCheck> out;
  for (double eta : etas) {
    GordonCheck g;
    g.d_out = d_out;
    g.r = r;
    g.eta = eta;
    g.c = c;
    g.trials = trials;
    finish(g, s_min);
    out.push_back(g);
  }
  return out;
}

GordonCheck gordon_verify(std::size_t d_out, std::size_t r, double eta, std::size_t trials,
                          const RngState& rng, double c, Exec exec) {
  const double etas[] = {eta};
  return gordon_verify_grid(d_out, r, etas, trials, rng, c, exec).front();
}

UnionGordon union_gordon(std::span<const std::size_t> out_dims, std::size_t r, double eta,
                         std::size_t trials, const RngState& rng, double c, Exec exec) {
  check_trials(trials);
  if (out_dims.empty()) throw InvalidParameter("need at least one layer");
  if (r == 0) throw InvalidParameter("r must be positive");
  if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
  if (!(c > 0.0)) throw InvalidParameter("Gordon constant c must be positive");
  // Layer l draws from its own stream so each layer sees independent trials.
  std::vector<unsigned char> failed(trials, 0);
  std::vector<double> s_min(trials);
  for (std::size_t l = 0; l < out_dims.size(); ++l) {
    if (out_dims[l] == 0) throw InvalidParameter("layer widths must be positive");
    kernels::smallest_singular_values(out_dims[l], r, rng.split(l), s_min, exec);
    const double threshold = std::sqrt(static_cast<double>(out_dims[l])) -
                             std::sqrt(static_cast<double>(r)) - eta;
    for (std::size_t k = 0; k < trials; ++k) {
      if (s_min[k] < threshold) failed[k] = 1;
    }
  }
  UnionGordon u;
  u.trials = trials;
  u.layers = out_dims.size();
  u.failure_rate = static_cast<double>(std::count(failed.begin(), failed.end(), 1)) /
                   static_cast<double>(trials);
  u.bound = 2.0 * static_cast<double>(u.layers) * std::exp(-c * eta * eta);
  u.tolerance = u.bound + 3.0 * std::sqrt(u.bound / static_cast<double>(trials));
  u.passed = u.failure_rate <= u.tolerance;
  return u;
}

double small_ball_exact(std::size_t N, double t) {
  if (N < 1) throw InvalidParameter("N must be at least 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidParameter("t must be finite and >= 0");
  if (N > kSmallBallExactMax) throw InvalidParameter("N too large for exact enumeration");
  // Sums live on a lattice of spacing 2, so a window of half-width t holds
  // at most floor(t) + 1 consecutive lattice points.
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(std::floor(t)) + 1,
                                                   N + 1);
  std::vector<double> pmf(N + 1);
  const double n = static_cast<double>(N);
  const double log_norm = std::lgamma(n + 1.0) - n * std::log(2.0);
  for (std::size_t k = 0; k <= N; ++k) {
    const double kd = static_cast<double>(k);
    pmf[k] = std::exp(log_norm - std::lgamma(kd + 1.0) - std::lgamma(n - kd + 1.0));
  }
  double best = 0.0;
  for (std::size_t k = 0; k + window <= N + 1; ++k) {
    double s = 0.0;
    for (std::size_t j = k; j < k + window; ++j) s += pmf[j];
    best = std::max(best, s);
  }
  return std::min(best, 1.0);
}

SmallBallEstimate small_ball(std::size_t N, double t, std::size_t trials, const RngState& rng,
                             bool force_mc, Exec exec) {
  if (N < 1) throw InvalidParameter("N must be at least 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidParameter("t must be finite and >= 0");
  SmallBallEstimate out;
  out.N = N;
  out.t = t;
  out.exact_available = N <= kSmallBallExactMax;
  if (out.exact_available) out.p_exact = small_ball_exact(N, t);
  if (out.exact_available && !force_mc) {
    out.p_hat = *out.p_exact;
    return out;
  }
  check_trials(trials);
  std::vector<std::int64_t> sums(trials);
  kernels::rademacher_sums(N, rng, sums, exec);
  const auto reach = static_cast<std::int64_t>(std::ceil(2.0 * t));
  std::size_t best = 0;
  for (std::int64_t v = -reach; v <= reach; ++v) {
    const auto hits = static_cast<std::size_t>(std::count_if(sums.begin(), sums.end(), [&](std::int64_t s) {
      return std::abs(static_cast<double>(s - v)) <= t;
    }));
    best = std::max(best, hits);
  }
  out.trials = trials;
  out.p_hat = static_cast<double>(best) / static_cast<double>(trials);
  out.standard_error = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(trials));
  return out;
}

Architecture LowerBoundConfig::arch() const {
  Architecture a;
  a.d = 1;
  a.D = 1;
  a.T = T;
  a.W = W;
  a.r = square_b ? W : r;
  a.activation = net::Activation::relu();
  return a;
}

void LowerBoundConfig::validate() const {
  if (T < 1) throw InvalidParameter("T must be at least 1");
  if (W < 1) throw InvalidParameter("W must be at least 1");
  if (!square_b && (r < 1 || r >= W)) throw InvalidParameter("r must satisfy 1 <= r < W");
  if (N < 1) throw InvalidParameter("N must be at least 1");
  check_trials(trials);
  if (!(c > 0.0)) throw InvalidParameter("c must be positive");
  if (!(weight_scale > 0.0)) throw InvalidParameter("weight_scale must be positive");
  if (!square_b) {
    const double star = eta_star(arch());
    if (!(eta > 0.0 && eta < star)) {
      throw InvalidParameter("eta must lie in (0, eta*) with eta* = " + std::to_string(star));
    }
  } else if (!(eta > 0.0)) {
    throw InvalidParameter("eta must be positive");
  }
  const double layers = static_cast<double>(T + 1);
  const double lo = 2.0 * layers * std::exp(-c * eta * eta);
  const double hi = 2.0 * layers;
  if (!(delta > lo && delta < hi)) {
    throw InvalidParameter("delta must lie in (2(T+1)exp(-c eta^2), 2(T+1)) = (" +
                           std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
}

LowerBoundReport lower_bound_experiment(const LowerBoundConfig& cfg, const RngState& rng,
                                        Exec exec) {
  cfg.validate();
  const Architecture arch = cfg.arch();
  RngState net_rng = rng.split(0);
  const PretrainedNet net = net::random_pretrained(net_rng, arch, cfg.weight_scale, 0.0);
  const RngState trial_rng = rng.split(1);
  const double threshold = cfg.square_b ? -std::numeric_limits<double>::infinity()
                                        : std::sqrt(static_cast<double>(cfg.W)) -
                                              std::sqrt(static_cast<double>(arch.r)) - cfg.eta;

  struct Trial {
    double residual = 0.0;
    bool gordon_ok = true;
    bool admissible_ok = true;
    bool rank_deficient = false;
    bool event = false;
  };
  std::vector<Trial> trials(cfg.trials);
  kernels::parallel_for(cfg.trials, exec, [&](std::size_t k) {
    RngState stream = trial_rng.split(k);
    std::vector<Matrix> b;
    for (std::size_t t = 0; t < arch.layers(); ++t) {
      b.push_back(num::sample_gaussian(stream, arch.out_dim(t), arch.r, 1.0));
    }
    const auto inst = construct_adversarial(net, std::move(b), cfg.eta, cfg.square_b);
    Trial out;
    out.residual = inst.residual;
    out.admissible_ok = inst.admissibility_holds;
    out.rank_deficient = inst.rank_deficient;
    for (std::size_t t = 0; t < arch.T; ++t) {
      if (inst.b_min_sv[t] < threshold) out.gordon_ok = false;
    }
    double f[2];
    for (int x = 0; x < 2; ++x) {
      const double xv = x;
      f[x] = std::abs(net::forward_lora(net, inst.adapter, std::span<const double>(&xv, 1))[0]);
    }
    const double true_risk = 0.5 * (f[0] + f[1]);
    std::size_t ones = 0;
    for (std::size_t n = 0; n < cfg.N; ++n) ones += static_cast<std::size_t>(stream.bernoulli());
    const double nd = static_cast<double>(cfg.N);
    const double emp_risk = (static_cast<double>(ones) * f[1] +
                             static_cast<double>(cfg.N - ones) * f[0]) / nd;
    // Gaps sit on a 1/(2N) lattice when the emulation is exact, so a tie at
    // exactly 1/N must not be decided by rounding in the residual.
    out.event = out.gordon_ok && std::abs(true_risk - emp_risk) > 1.0 / nd + kEventSlack;
    trials[k] = out;
  });

  LowerBoundReport rep;
  rep.eta = cfg.eta;
  rep.square_b = cfg.square_b;
  rep.N = cfg.N;
  rep.trials = cfg.trials;
  rep.eta_star = cfg.square_b ? 0.0 : eta_star(arch);
  if (!cfg.square_b) rep.M_eta = m_eta(arch, cfg.eta);
  rep.C_pre = c_pre(net);
  std::size_t events = 0, gordon_fail = 0, admissible = 0;
  for (const auto& t : trials) {
    rep.residual_max = std::max(rep.residual_max, t.residual);
    events += t.event;
    gordon_fail += !t.gordon_ok;
    admissible += t.gordon_ok;
    rep.admissibility_violations += !t.admissible_ok;
    rep.rank_deficient += t.rank_deficient;
  }
  const double n = static_cast<double>(cfg.trials);
  rep.event_frequency = static_cast<double>(events) / n;
  rep.event_standard_error =
      std::sqrt(rep.event_frequency * (1.0 - rep.event_frequency) / n);
  rep.gordon_rate = static_cast<double>(gordon_fail) / n;
  rep.admissible_frequency = static_cast<double>(admissible) / n;
  rep.gordon_bound = 2.0 * static_cast<double>(cfg.T + 1) * std::exp(-cfg.c * cfg.eta * cfg.eta);
  const auto sb = small_ball(cfg.N, 2.0, std::max<std::size_t>(cfg.trials, 100000),
                             rng.split(2), false, exec);
  rep.smallball_p = sb.p_hat;
  rep.theory_floor = (1.0 - cfg.delta / 2.0) * (1.0 - rep.smallball_p);
  return rep;
}

}  // namespace loralab::adv
