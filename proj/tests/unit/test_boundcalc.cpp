#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "loralab/boundcalc.hpp"
#include "loralab/errors.hpp"
#include "test_util.hpp"

namespace {

using loralab::InvalidParameter;
using loralab::testing::rel_err;
namespace bound = loralab::bound;
namespace net = loralab::net;

struct OracleRow {
  std::size_t d, D, T, W, r;
  double M, nu, R0;
  std::int64_t N;
  double delta, c2, epsilon, R, A;
  std::int64_t q;
  double G_star;
};

const OracleRow kOracle[] = {
#include "oracles/bound_grid.inc"
};

bound::BoundConfig config_of(const OracleRow& row) {
  bound::BoundConfig cfg;
  cfg.arch.d = row.d;
  cfg.arch.D = row.D;
  cfg.arch.T = row.T;
  cfg.arch.W = row.W;
  cfg.arch.r = row.r;
  cfg.M = row.M;
  cfg.nu = row.nu;
  cfg.R0 = row.R0;
  cfg.N = row.N;
  cfg.delta = row.delta;
  cfg.c2 = row.c2;
  return cfg;
}

bound::BoundConfig base_config() {
  bound::BoundConfig cfg;
  cfg.arch.d = 8;
  cfg.arch.D = 1;
  cfg.arch.T = 2;
  cfg.arch.W = 64;
  cfg.arch.r = 4;
  cfg.M = 1.0;
  cfg.nu = 1.0;
  cfg.R0 = 0.5;
  cfg.N = 10000;
  cfg.delta = 0.1;
  return cfg;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

TEST(BoundOracle, TwentyPointGridToOnePartInTenToTheTwelve) {
  ASSERT_EQ(std::size(kOracle), 20u);
  for (const auto& row : kOracle) {
    const auto rep = bound::generalization_bound(config_of(row));
    EXPECT_LE(rel_err(rep.epsilon, row.epsilon), 1e-12);
    EXPECT_LE(rel_err(rep.R, row.R), 1e-12);
    EXPECT_LE(rel_err(rep.A, row.A), 1e-12);
    EXPECT_EQ(rep.q_formula, row.q);
    EXPECT_LE(rel_err(rep.G_star, row.G_star), 1e-12) << "N=" << row.N << " W=" << row.W;
  }
}

TEST(Epsilon, StableFormAndRange) {
  EXPECT_EQ(bound::epsilon_from_delta(1.0), 1.0);
  EXPECT_LE(rel_err(bound::epsilon_from_delta(1e-12), 5e-13), 1e-9);
  EXPECT_THROW(bound::epsilon_from_delta(0.0), InvalidParameter);
  EXPECT_THROW(bound::epsilon_from_delta(1.5), InvalidParameter);
}

TEST(ComputeR, Examples) {
  EXPECT_NEAR(bound::compute_R(1.0, 1.0, 1, 1, 2.0 / std::exp(1.0)), std::sqrt(2.0), 1e-15);
  const double base = bound::compute_R(1.0, 1.0, 4, 64, 0.05);
  EXPECT_EQ(bound::compute_R(2.0, 1.0, 4, 64, 0.05), 2.0 * base);
  EXPECT_LE(rel_err(base, 7.923515652776163), 1e-14);
  EXPECT_THROW(bound::compute_R(1.0, 1.0, 1, 1, 2.0), InvalidParameter);
  EXPECT_THROW(bound::compute_R(0.0, 1.0, 1, 1, 0.5), InvalidParameter);
}

TEST(LipschitzBound, Examples) {
  auto cfg = base_config();
  // Choose M so that R = 3 at this epsilon, then R0 = 1.
  const double eps = 0.05;
  cfg.M = 3.0 / bound::compute_R(1.0, 1.0, 4, 64, eps);
  cfg.R0 = 1.0;
  cfg.c2 = 1.0;
  EXPECT_NEAR(bound::lipschitz_bound(cfg, eps), 64.0, 1e-12);
  cfg.c2 = 1e-300;
  EXPECT_NEAR(bound::lipschitz_bound(cfg, eps), 1.0, 1e-12);
  cfg.c2 = 1.0;
  cfg.M = 0.25 / bound::compute_R(1.0, 1.0, 4, 64, eps);
  cfg.R0 = 0.75;
  EXPECT_NEAR(bound::lipschitz_bound(cfg, eps), 4.0, 1e-12);
}

TEST(LipschitzBound, IntervalNeedsC1AndIsOrdered) {
  auto cfg = base_config();
  EXPECT_THROW(bound::lipschitz_interval(cfg, 0.05), InvalidParameter);
  cfg.c1 = 0.5;
  const auto iv = bound::lipschitz_interval(cfg, 0.05);
  EXPECT_LE(iv.lower, iv.upper);
  cfg.c1 = 2.0;
  EXPECT_THROW(cfg.validate(), InvalidParameter);
}

TEST(CoveringParams, Examples) {
  EXPECT_EQ(bound::covering_bound_params(1.0, 1.0, 5), 0.0);
  EXPECT_NEAR(bound::covering_bound_params(1.0, 0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bound::covering_bound_params(4.0, 0.3, 10), 10.0 * std::log(16.0), 1e-13);
  EXPECT_THROW(bound::covering_bound_params(1.0, 0.0, 1), InvalidParameter);
}

TEST(CoveringLora, ExamplesAndMonotonicity) {
  // d=2, D=1, T=2, W=3, r=1 has q = 6; pick M so that R = 3 with R0 = 1.
  bound::BoundConfig cfg;
  cfg.arch.d = 2;
  cfg.arch.D = 1;
  cfg.arch.T = 2;
  cfg.arch.W = 3;
  cfg.arch.r = 1;
  const double eps = 0.05;
  cfg.M = 3.0 / bound::compute_R(1.0, 1.0, 1, 3, eps);
  cfg.R0 = 1.0;
  EXPECT_LE(rel_err(bound::covering_bound_lora(cfg, eps, 0.1), 51.24545830820132), 1e-13);
  EXPECT_NEAR(bound::covering_bound_lora(cfg, eps, 512.0), 0.0, 1e-12);
  double prev = bound::covering_bound_lora(cfg, eps, 1e-3);
  for (double e : {1e-2, 0.1, 1.0, 10.0}) {
    const double v = bound::covering_bound_lora(cfg, eps, e);
    EXPECT_LT(v, prev);
    prev = v;
  }
  // q doubles when r doubles (W must exceed r).
  auto twice = cfg;
  twice.arch.W = 5;
  twice.arch.r = 2;
  twice.M = cfg.M;
  const double q1 = static_cast<double>(net::count_params(twice.arch).q_formula);
  twice.arch.r = 1;
  const double q2 = static_cast<double>(net::count_params(twice.arch).q_formula);
  EXPECT_EQ(q1, 2.0 * q2);
}

TEST(CoveringLora, LogSpaceSafeAtLargeSizes) {
  bound::BoundConfig cfg;
  cfg.arch.d = 1000;
  cfg.arch.D = 1000;
  cfg.arch.T = 10;
  cfg.arch.W = 100000;
  cfg.arch.r = 9;
  cfg.M = 1e6 / bound::compute_R(1.0, 1.0, 9, 100000, 0.05);
  cfg.R0 = 1e6;
  ASSERT_GE(net::count_params(cfg.arch).q_formula, 1000000);
  const double v = bound::covering_bound_lora(cfg, 0.05, 1e-6);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
}

TEST(Dudley, Examples) {
  const auto v = bound::dudley_from_terms(6, 4.9, 10000);
  EXPECT_LE(rel_err(v.rademacher_bound, 0.650661202162846), 1e-13);
  EXPECT_FALSE(v.degenerate);
  EXPECT_EQ(bound::dudley_from_terms(100, 10.0, 100).rademacher_bound, 2.0);
  EXPECT_LT(bound::dudley_from_terms(6, 4.9, 10000000000LL).rademacher_bound, 1e-3);
  const auto deg = bound::dudley_from_terms(6, -0.5, 100);
  EXPECT_TRUE(deg.degenerate);
  EXPECT_EQ(deg.rademacher_bound, 0.0);
  EXPECT_GE(v.t_star, 0.0);
  EXPECT_LE(v.t_star, 0.5);
}

TEST(GStar, Examples) {
  EXPECT_LE(rel_err(bound::g_star_from_terms(6, 4.9, 10000, bound::epsilon_from_delta(0.1)),
                    1.355454732458068),
            1e-12);
  auto cfg = base_config();
  cfg.delta = 1.0;
  const auto rep = bound::generalization_bound(cfg);
  EXPECT_EQ(rep.epsilon, 1.0);
  EXPECT_NEAR(rep.tail_term, std::sqrt(8.0 * std::log(2.0) / 10000.0), 1e-16);
  cfg.N = 100;
  EXPECT_EQ(bound::generalization_bound(cfg).complexity_term, 4.0);
}

TEST(GStar, ReportFieldsFiniteNonNegativeAndCapped) {
  for (const auto& row : kOracle) {
    const auto rep = bound::generalization_bound(config_of(row));
    for (double v : {rep.epsilon, rep.R, rep.L_lora, rep.t_star, rep.G_star}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
    EXPECT_LE(rep.G_star, 4.0 + std::sqrt(8.0 * std::log(2.0 / rep.epsilon) /
                                          static_cast<double>(row.N)) + 1e-15);
  }
}

TEST(GStar, FirstTermIsTwiceRademacherWhenInterior) {
  auto cfg = base_config();
  cfg.N = 100000000;
  const auto rep = bound::generalization_bound(cfg);
  ASSERT_LT(rep.complexity_term, 4.0);
  EXPECT_LE(rel_err(rep.complexity_term, 2.0 * rep.rademacher_bound), 1e-14);
}

TEST(GStar, RejectsBadConfig) {
  auto cfg = base_config();
  cfg.delta = 0.0;
  EXPECT_THROW(bound::generalization_bound(cfg), InvalidParameter);
  cfg = base_config();
  cfg.N = 0;
  EXPECT_THROW(bound::generalization_bound(cfg), InvalidParameter);
  cfg = base_config();
  cfg.c2 = 0.0;
  EXPECT_THROW(bound::generalization_bound(cfg), InvalidParameter);
  cfg = base_config();
  cfg.arch.r = cfg.arch.W;
  EXPECT_THROW(bound::generalization_bound(cfg), loralab::InvalidArchitecture);
}

TEST(GStar, MonotoneAlongEachAxis) {
  auto g = [](const bound::BoundConfig& c) { return bound::generalization_bound(c).G_star; };
  auto cfg = base_config();
  cfg.N = 100000000;  // keep the min branch interior so changes are visible
  double prev = 0.0;
  for (std::size_t r : {1u, 2u, 4u, 8u, 16u, 32u}) {
    auto c = cfg;
    c.arch.r = r;
    EXPECT_GE(g(c), prev);
    prev = g(c);
  }
  prev = 1e300;
  for (std::int64_t N : {1000LL, 10000LL, 100000LL, 1000000LL, 10000000LL, 100000000LL}) {
    auto c = cfg;
    c.N = N;
    EXPECT_LE(g(c), prev);
    prev = g(c);
  }
  for (double bound::BoundConfig::*field : {&bound::BoundConfig::M, &bound::BoundConfig::nu}) {
    prev = 0.0;
    for (double v : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      auto c = cfg;
      c.*field = v;
      EXPECT_GE(g(c), prev);
      prev = g(c);
    }
  }
  prev = 0.0;
  for (std::size_t T : {1u, 2u, 3u, 4u, 5u}) {
    auto c = cfg;
    c.arch.T = T;
    EXPECT_GE(g(c), prev);
    prev = g(c);
  }
}

TEST(GStar, HalfPowerRateInN) {
  bound::BoundConfig cfg;
  cfg.arch.d = 2;
  cfg.arch.D = 1;
  cfg.arch.T = 1;
  cfg.arch.W = 4;
  cfg.arch.r = 1;
  cfg.R0 = 0.5;
  std::vector<double> ns, gs;
  for (double n = 1e3; n <= 1e7 * 1.0001; n *= std::sqrt(10.0)) {
    cfg.N = static_cast<std::int64_t>(std::llround(n));
    const auto rep = bound::generalization_bound(cfg);
    ASSERT_LT(rep.complexity_term, 4.0);
    ns.push_back(static_cast<double>(cfg.N));
    gs.push_back(rep.G_star);
  }
  EXPECT_NEAR(slope(ns, gs), -0.5, 0.01);
}

TEST(CurryLipschitz, PassThrough) {
  EXPECT_EQ(bound::loss_curry_lipschitz(1.0), 1.0);
  EXPECT_EQ(bound::loss_curry_lipschitz(0.0), 0.0);
  EXPECT_EQ(bound::loss_curry_lipschitz(3.0), 3.0);
  EXPECT_THROW(bound::loss_curry_lipschitz(-1.0), InvalidParameter);
  auto cfg = base_config();
  cfg.loss_lipschitz = 3.0;
  const auto rep = bound::generalization_bound(cfg);
  EXPECT_EQ(rep.L_total, 3.0 * rep.L_lora);
}

TEST(BoundReport, CoveringLogMatchesFreeFunction) {
  const auto cfg = base_config();
  const auto rep = bound::generalization_bound(cfg);
  for (double e : {0.01, 0.1, 1.0}) {
    EXPECT_LE(rel_err(rep.covering_log(e), bound::covering_bound_lora(cfg, rep.epsilon, e)),
              1e-14);
  }
}

}  // namespace
