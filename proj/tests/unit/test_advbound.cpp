#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "loralab/advbound.hpp"
#include "loralab/empiric.hpp"
#include "loralab/errors.hpp"
#include "test_util.hpp"

namespace {

using loralab::Exec;
using loralab::InvalidArchitecture;
using loralab::InvalidInput;
using loralab::InvalidParameter;
using loralab::num::Matrix;
using loralab::num::RngState;
namespace adv = loralab::adv;
namespace net = loralab::net;
namespace num = loralab::num;

struct SmallBallRow {
  std::size_t N;
  double t;
  double p;
};

const SmallBallRow kSmallBall[] = {
#include "oracles/small_ball.inc"
};

net::Architecture line_arch(std::size_t T, std::size_t W, std::size_t r) {
  net::Architecture a;
  a.d = 1;
  a.D = 1;
  a.T = T;
  a.W = W;
  a.r = r;
  return a;
}

std::vector<Matrix> gaussian_factors(RngState& rng, const net::Architecture& arch) {
  std::vector<Matrix> b;
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    b.push_back(num::sample_gaussian(rng, arch.out_dim(t), arch.r, 1.0));
  }
  return b;
}

TEST(AssumptionDist, BernoulliInputsZeroLabels) {
  RngState rng(1);
  const auto data = adv::sample_assumption_dist(rng, 1000000);
  double s = 0.0, ss = 0.0;
  for (double x : data.inputs.entries()) {
    ASSERT_TRUE(x == 0.0 || x == 1.0);
    s += x;
    ss += x * x;
  }
  for (double y : data.targets.entries()) ASSERT_EQ(y, 0.0);
  const double n = static_cast<double>(data.size());
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 0.002);
  EXPECT_NEAR(var, 0.25, 0.002);
  EXPECT_THROW(adv::sample_assumption_dist(rng, 0), InvalidParameter);
}

TEST(IdentityInterpolator, PaddingAndShrinkRejection) {
  const std::size_t same[] = {3, 3};
  EXPECT_EQ(adv::build_identity_interpolator(same)[0], Matrix::identity(3));
  const std::size_t grow[] = {1, 3};
  EXPECT_EQ(adv::build_identity_interpolator(grow)[0], Matrix(3, 1, std::vector<double>{1, 0, 0}));
  const std::size_t shrink[] = {1, 4, 2};
  EXPECT_THROW(adv::build_identity_interpolator(shrink), InvalidArchitecture);

  RngState rng(2);
  const std::size_t dims[] = {3, 6};
  const Matrix pad = adv::build_identity_interpolator(dims)[0];
  for (int k = 0; k < 10; ++k) {
    const std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    const auto y = num::matvec(pad, x);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y[i], i < 3 ? x[i] : 0.0);
  }
}

TEST(EtaStar, MarginAndMEta) {
  const auto arch = line_arch(2, 16, 4);
  EXPECT_DOUBLE_EQ(adv::eta_star(arch), 2.0);
  EXPECT_DOUBLE_EQ(adv::m_eta(arch, 1.5), 2.0);
  EXPECT_THROW(adv::m_eta(arch, 2.0), InvalidParameter);
  EXPECT_THROW(adv::m_eta(arch, 0.0), InvalidParameter);
  for (double eta : {0.1, 0.5, 1.0, 1.9, 1.999}) {
    const double m = adv::m_eta(arch, eta);
    EXPECT_TRUE(std::isfinite(m));
    EXPECT_GT(m, 0.0);
  }
}

TEST(CPre, OnePlusLargestOperatorNorm) {
  auto pre = net::zero_pretrained(line_arch(1, 3, 1));
  EXPECT_EQ(adv::c_pre(pre), 1.0);
  pre.weights[0](1, 0) = -2.0;
  pre.weights[1](0, 2) = 1.5;
  EXPECT_NEAR(adv::c_pre(pre), 3.0, 1e-14);
}

TEST(ConstructAdversarial, SquareFactorsGiveExactIdentity) {
  RngState rng(3);
  for (std::size_t T : {1u, 2u, 3u}) {
    auto arch = line_arch(T, 8, 8);
    const auto pre = net::random_pretrained(rng, arch);
    const auto inst = adv::construct_adversarial(pre, gaussian_factors(rng, arch), 1.0, true);
    EXPECT_LE(inst.residual, 1e-8);
    EXPECT_TRUE(inst.admissibility_holds);
    EXPECT_FALSE(inst.M_eta.has_value());
  }
}

TEST(ConstructAdversarial, AlreadyIdentityNeedsNoCorrection) {
  RngState rng(4);
  const auto arch = line_arch(2, 9, 2);
  auto pre = net::zero_pretrained(arch);
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    pre.weights[t] = adv::padded_identity(arch.out_dim(t), arch.in_dim(t));
  }
  const auto inst = adv::construct_adversarial(pre, gaussian_factors(rng, arch), 0.5);
  for (std::size_t t = 0; t < arch.layers(); ++t) EXPECT_EQ(inst.adapter.a(t).max_abs(), 0.0);
  EXPECT_EQ(inst.residual, 0.0);
}

TEST(ConstructAdversarial, NarrowFactorsReportResidualAndAdmissibility) {
  RngState rng(5);
  const auto arch = line_arch(1, 16, 4);
  const auto pre = net::random_pretrained(rng, arch);
  const auto inst = adv::construct_adversarial(pre, gaussian_factors(rng, arch), 1.0);
  EXPECT_TRUE(std::isfinite(inst.residual));
  EXPECT_GT(inst.residual, 0.0);
  EXPECT_TRUE(inst.admissibility_holds);
  ASSERT_TRUE(inst.M_eta.has_value());
  EXPECT_DOUBLE_EQ(*inst.M_eta, 1.0 / (4.0 - 2.0 - 1.0));
  EXPECT_DOUBLE_EQ(inst.C_pre, adv::c_pre(pre));
  for (std::size_t t = 0; t < arch.layers(); ++t) {
    EXPECT_LE(inst.a_norm[t], inst.admissible_limit[t] + 1e-8);
    const Matrix expected = num::pinv(inst.adapter.b(t)) *
                            (adv::padded_identity(arch.out_dim(t), arch.in_dim(t)) -
                             pre.weights[t]);
    EXPECT_EQ(inst.adapter.a(t), expected);
  }
}

TEST(ConstructAdversarial, AdmissibilityOverManyConstructions) {
  RngState rng(6);
  std::size_t violations = 0;
  for (int k = 0; k < 200; ++k) {
    const auto arch = line_arch(1 + rng.below(3), 8 + rng.below(24), 1 + rng.below(4));
    const auto pre = net::random_pretrained(rng, arch, 0.5 + 2.0 * rng.uniform());
    const double eta = 0.5 * adv::eta_star(arch);
    const auto inst = adv::construct_adversarial(pre, gaussian_factors(rng, arch), eta);
    violations += !inst.admissibility_holds;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(ConstructAdversarial, RejectsOutOfRangeEtaAndBadNets) {
  RngState rng(7);
  const auto arch = line_arch(1, 16, 4);
  const auto pre = net::random_pretrained(rng, arch);
  EXPECT_THROW(adv::construct_adversarial(pre, gaussian_factors(rng, arch), 2.0),
               InvalidParameter);
  EXPECT_THROW(adv::construct_adversarial(pre, gaussian_factors(rng, arch), 0.0),
               InvalidParameter);
  auto biased = pre;
  biased.biases[0][0] = 0.1;
  EXPECT_THROW(adv::construct_adversarial(biased, gaussian_factors(rng, arch), 1.0),
               InvalidArchitecture);
  auto tanh_arch = arch;
  tanh_arch.activation = net::Activation::tanh();
  const auto tanh_net = net::random_pretrained(rng, tanh_arch);
  EXPECT_THROW(adv::construct_adversarial(tanh_net, gaussian_factors(rng, arch), 1.0),
               InvalidArchitecture);
  auto wide = arch;
  wide.d = 2;
  const auto wide_net = net::random_pretrained(rng, wide);
  EXPECT_THROW(adv::construct_adversarial(wide_net, gaussian_factors(rng, wide), 1.0),
               InvalidArchitecture);
  auto short_b = gaussian_factors(rng, arch);
  short_b.pop_back();
  EXPECT_THROW(adv::construct_adversarial(pre, short_b, 1.0), InvalidInput);
}

TEST(ConstructAdversarial, FlagsRankDeficientFactor) {
  RngState rng(8);
  const auto arch = line_arch(1, 6, 2);
  const auto pre = net::random_pretrained(rng, arch);
  auto b = gaussian_factors(rng, arch);
  for (std::size_t i = 0; i < 6; ++i) b[0](i, 1) = 2.0 * b[0](i, 0);
  const auto inst = adv::construct_adversarial(pre, b, 0.1);
  EXPECT_TRUE(inst.rank_deficient);
}

TEST(Gordon, LargeEtaNeverFails) {
  const auto g = adv::gordon_verify(100, 4, 8.0, 10000, RngState(9));
  EXPECT_EQ(g.failures, 0u);
  EXPECT_TRUE(g.passed);
  EXPECT_GE(g.mean_s_min, 10.0 - 2.0 - 0.5);
  EXPECT_LE(g.mean_s_min, 10.0 + 2.0 + 0.5);
}

TEST(Gordon, VacuousBoundPasses) {
  const auto g = adv::gordon_verify(16, 4, 1.0, 1000, RngState(10));
  EXPECT_GT(g.bound, 1.0);
  EXPECT_TRUE(g.passed);
  EXPECT_NEAR(g.bound, 2.0 * std::exp(-0.5), 1e-15);
}

TEST(Gordon, GridSharesDrawsAndMatchesSingle) {
  const double etas[] = {0.5, 1.0, 2.0};
  const auto grid = adv::gordon_verify_grid(32, 4, etas, 2000, RngState(11));
  const auto one = adv::gordon_verify(32, 4, 1.0, 2000, RngState(11));
  EXPECT_EQ(grid[1].failures, one.failures);
  EXPECT_GE(grid[0].failures, grid[1].failures);
  EXPECT_GE(grid[1].failures, grid[2].failures);
  EXPECT_THROW(adv::gordon_verify(32, 4, 1.0, 999, RngState(1)), InvalidParameter);
  EXPECT_THROW(adv::gordon_verify(32, 4, 0.0, 1000, RngState(1)), InvalidParameter);
}

TEST(Gordon, DominatesOnWideGrid) {
  for (auto [d, r] : {std::pair<std::size_t, std::size_t>{16, 4}, {32, 2}, {64, 8}}) {
    const double etas[] = {0.5, 1.0, 2.0, 3.0};
    for (const auto& g : adv::gordon_verify_grid(d, r, etas, 2000, RngState(d + r))) {
      EXPECT_TRUE(g.passed) << d << "x" << r << " eta " << g.eta;
    }
  }
}

TEST(UnionGordon, SingleLayerDoublesAndWideNeverFails) {
  const std::size_t one[] = {64};
  const auto u = adv::union_gordon(one, 4, 2.0, 2000, RngState(12));
  const auto g = adv::gordon_verify(64, 4, 2.0, 2000, RngState(12).split(0));
  EXPECT_EQ(u.failure_rate, g.failure_rate);
  EXPECT_NEAR(u.bound, g.bound, 1e-15);
  const std::size_t two[] = {64, 64};
  EXPECT_NEAR(adv::union_gordon(two, 4, 2.0, 1000, RngState(1)).bound, 2.0 * g.bound, 1e-15);

  const std::size_t wide[] = {256, 256, 256};
  EXPECT_EQ(adv::union_gordon(wide, 2, 3.0, 1000, RngState(13)).failure_rate, 0.0);

  const auto tiny = adv::union_gordon(two, 4, 1e-3, 1000, RngState(14));
  EXPECT_NEAR(tiny.bound, 4.0, 1e-5);
  EXPECT_TRUE(tiny.passed);
}

TEST(SmallBall, ExactTableFromArbitraryPrecision) {
  for (const auto& row : kSmallBall) {
    EXPECT_LE(loralab::testing::rel_err(adv::small_ball_exact(row.N, row.t), row.p), 1e-10)
        << "N=" << row.N << " t=" << row.t;
  }
}

TEST(SmallBall, ExamplesAndPaths) {
  EXPECT_EQ(adv::small_ball_exact(1, 0.0), 0.5);
  EXPECT_NEAR(adv::small_ball_exact(100, 2.0), 0.2356, 5e-5);
  const auto ex = adv::small_ball(100, 2.0, 1000, RngState(1));
  EXPECT_TRUE(ex.exact_available);
  EXPECT_EQ(ex.trials, 0u);
  EXPECT_EQ(ex.p_hat, *ex.p_exact);

  const auto mc = adv::small_ball(100, 2.0, 200000, RngState(15), true);
  EXPECT_GT(mc.standard_error, 0.0);
  EXPECT_LE(std::abs(mc.p_hat - *mc.p_exact), 4.0 * mc.standard_error);

  const auto big = adv::small_ball(10000, 2.0, 20000, RngState(16));
  EXPECT_FALSE(big.exact_available);
  EXPECT_FALSE(big.p_exact.has_value());
  EXPECT_GT(big.p_hat, 0.0);
  EXPECT_THROW(adv::small_ball(10000, 2.0, 999, RngState(1)), InvalidParameter);
  EXPECT_THROW(adv::small_ball(10, -1.0, 1000, RngState(1)), InvalidParameter);
}

TEST(SmallBall, HalfPowerDecay) {
  std::vector<double> ns, ps;
  for (std::size_t n : {16u, 64u, 256u, 1024u}) {
    ns.push_back(static_cast<double>(n));
    ps.push_back(adv::small_ball_exact(n, 2.0));
  }
  EXPECT_NEAR(loralab::emp::fit_loglog_slope(ns, ps), -0.5, 0.1);
}

TEST(SmallBall, SerialAndParallelAgree) {
  const auto a = adv::small_ball(5000, 3.0, 5000, RngState(17), true, Exec::Serial);
  const auto b = adv::small_ball(5000, 3.0, 5000, RngState(17), true, Exec::Parallel);
  EXPECT_EQ(a.p_hat, b.p_hat);
}

adv::LowerBoundConfig square_config(std::size_t N, std::size_t trials) {
  adv::LowerBoundConfig cfg;
  cfg.T = 1;
  cfg.W = 8;
  cfg.square_b = true;
  cfg.eta = 3.0;
  cfg.delta = 1.0;
  cfg.N = N;
  cfg.trials = trials;
  return cfg;
}

TEST(LowerBound, SquareModeMatchesExactComplement) {
  const auto rep = adv::lower_bound_experiment(square_config(100, 20000), RngState(18));
  const double exact = 1.0 - adv::small_ball_exact(100, 2.0);
  EXPECT_LE(rep.residual_max, 1e-8);
  EXPECT_LE(std::abs(rep.event_frequency - exact), 3.0 * rep.event_standard_error);
  EXPECT_EQ(rep.admissibility_violations, 0u);
  EXPECT_FALSE(rep.M_eta.has_value());
  EXPECT_NEAR(rep.theory_floor, 0.5 * (1.0 - adv::small_ball_exact(100, 2.0)), 1e-15);
}

TEST(LowerBound, SingleSampleNeverExceedsOne) {
  EXPECT_EQ(adv::lower_bound_experiment(square_config(1, 1000), RngState(19)).event_frequency,
            0.0);
}

TEST(LowerBound, FrequencyGrowsWithN) {
  double prev = -1.0;
  for (std::size_t n : {4u, 16u, 64u, 256u}) {
    const auto rep = adv::lower_bound_experiment(square_config(n, 4000), RngState(20));
    const double exact = 1.0 - adv::small_ball_exact(n, 2.0);
    EXPECT_LE(std::abs(rep.event_frequency - exact), 4.0 * rep.event_standard_error + 1e-12);
    EXPECT_GE(rep.event_frequency, prev);
    prev = rep.event_frequency;
  }
}

TEST(LowerBound, NarrowModeReportsMeasuredQuantities) {
  adv::LowerBoundConfig cfg;
  cfg.T = 1;
  cfg.W = 16;
  cfg.r = 4;
  cfg.eta = 1.5;
  cfg.delta = 1.5;
  cfg.N = 100;
  cfg.trials = 1000;
  const auto rep = adv::lower_bound_experiment(cfg, RngState(21));
  EXPECT_GE(rep.event_frequency, 0.0);
  EXPECT_LE(rep.event_frequency, 1.0);
  EXPECT_EQ(rep.admissibility_violations, 0u);
  EXPECT_DOUBLE_EQ(rep.eta_star, 2.0);
  ASSERT_TRUE(rep.M_eta.has_value());
  EXPECT_DOUBLE_EQ(*rep.M_eta, 2.0);
  EXPECT_NEAR(rep.gordon_bound, 4.0 * std::exp(-0.5 * 2.25), 1e-15);
  EXPECT_NEAR(rep.admissible_frequency, 1.0 - rep.gordon_rate, 1e-15);
  EXPECT_EQ(adv::lower_bound_experiment(cfg, RngState(21), Exec::Serial).event_frequency,
            rep.event_frequency);
}

TEST(LowerBound, RejectsDeltaAndEtaOutsideRange) {
  adv::LowerBoundConfig cfg;
  cfg.T = 1;
  cfg.W = 16;
  cfg.r = 4;
  cfg.eta = 1.5;
  cfg.delta = 0.5;  // below 4 exp(-1.125)
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg.delta = 4.0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg.delta = 1.5;
  EXPECT_NO_THROW(cfg.validate());
  cfg.eta = 2.0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
  cfg.eta = 1.5;
  cfg.trials = 10;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
}

}  // namespace
