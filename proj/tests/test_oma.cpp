#include "irsnoma/oma.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace irsnoma;

namespace {

// dense grid over alpha_1 with golden refinement around the best cell; the
// independent route for the two-user airtime program
double grid_oracle_two_user(const RVec& c, const RVec& r, double sigma2) {
  const auto objective = [&](double a1) {
    const double a2 = 1.0 - a1;
    return sigma2 / c(0) * a1 * std::expm1(r(0) * M_LN2 / a1) +
           sigma2 / c(1) * a2 * std::expm1(r(1) * M_LN2 / a2);
  };
  double best = std::numeric_limits<double>::infinity();
  double best_a = 0.5;
  for (int i = 1; i < 100000; ++i) {
    const double a1 = i * 1e-5;
    const double val = objective(a1);
    if (val < best) {
      best = val;
      best_a = a1;
    }
  }
  return -testsupport::golden_max_oracle([&](double a) { return -objective(a); },
                                         std::max(1e-6, best_a - 1e-5), best_a + 1e-5);
}

}  // namespace

TEST(AlignedGain, DirectOnlyAndMonotoneInL) {
  ScenarioConfig cfg = ScenarioConfig::defaults_for_users(2);
  cfg.seed = 3;
  double prev0 = 0.0;
  for (int L : {1, 4, 16}) {
    cfg.L = L;
    const ChannelRealization ch = sample_channels(cfg, 0);
    const double c0 = aligned_gain(ch, 0);
    EXPECT_GT(c0, 0.0);
    // adding reflectors can only add amplitude on average; check the exact
    // identity against the stored key instead of cross-L monotonicity of one
    // draw (the draws differ), then the within-draw triangle bound
    EXPECT_NEAR(c0, ch.order_key(0) * ch.order_key(0), 1e-12 * c0);
    const CVec w = aligned_phases(ch, 0);
    EXPECT_NEAR(effective_gain(ch, w, 0), c0, 1e-10 * c0);
    prev0 = c0;
  }
  // explicit monotonicity on a fixed draw: truncating elements lowers the key
  cfg.L = 16;
  const ChannelRealization ch = sample_channels(cfg, 1);
  double key = std::abs(ch.v(0));
  double prev_gain = key * key;
  for (int i = 0; i < 16; ++i) {
    key += std::abs(ch.g(i)) * std::abs(ch.h[0](i));
    EXPECT_GE(key * key, prev_gain);
    prev_gain = key * key;
  }
}

TEST(OmaPowermin, SingleUserClosedForm) {
  const RVec c = (RVec(1) << 2.0).finished();
  const RVec r = (RVec(1) << 1.5).finished();
  const OmaAllocation out = oma_powermin(c, r, 0.5);
  EXPECT_NEAR(out.alpha(0), 1.0, 1e-12);
  EXPECT_NEAR(out.p(0), 0.5 / 2.0 * (std::exp2(1.5) - 1.0), 1e-12);
}

TEST(OmaPowermin, SymmetricUsersSplitExactlyEvenly) {
  const RVec c = (RVec(2) << 3.0, 3.0).finished();
  const RVec r = (RVec(2) << 0.7, 0.7).finished();
  const OmaAllocation out = oma_powermin(c, r, 1.0);
  EXPECT_DOUBLE_EQ(out.alpha(0), 0.5);
  EXPECT_DOUBLE_EQ(out.alpha(1), 0.5);
}

TEST(OmaPowermin, AsymmetricMatchesGridOracle) {
  auto rng = testsupport::rng_for(81);
  for (int t = 0; t < 15; ++t) {
    RVec c(2), r(2);
    c << std::pow(10.0, testsupport::unif(rng, -1, 1)), std::pow(10.0, testsupport::unif(rng, -1, 1));
    r << testsupport::unif(rng, 0.2, 2.0), testsupport::unif(rng, 0.2, 2.0);
    const double sigma2 = 1.0;
    const OmaAllocation out = oma_powermin(c, r, sigma2);
    const double oracle = grid_oracle_two_user(c, r, sigma2);
    EXPECT_LE(std::abs(out.avg_power - oracle), 1e-6 * oracle);
  }
}

TEST(OmaPowermin, SimplexAndRateInvariants) {
  auto rng = testsupport::rng_for(82);
  for (int t = 0; t < 30; ++t) {
    const int K = 1 + static_cast<int>(testsupport::unif(rng) * 3);
    RVec c(K), r(K);
    for (int k = 0; k < K; ++k) {
      c(k) = std::pow(10.0, testsupport::unif(rng, -1, 1));
      r(k) = testsupport::unif(rng, 0.1, 2.0);
    }
    const OmaAllocation out = oma_powermin(c, r, 1.0);
    EXPECT_NEAR(out.alpha.sum(), 1.0, 1e-10);
    for (int k = 0; k < K; ++k) {
      const double rate = out.alpha(k) * std::log2(1.0 + out.p(k) * c(k));
      EXPECT_NEAR(rate, r(k), 1e-9 * std::max(1.0, r(k)));
    }
  }
}

TEST(OmaPowermin, ZeroTargetsHandled) {
  const RVec c = (RVec(2) << 1.0, 2.0).finished();
  const OmaAllocation all_zero = oma_powermin(c, RVec::Zero(2), 1.0);
  EXPECT_NEAR(all_zero.alpha.sum(), 1.0, 1e-12);
  EXPECT_EQ(all_zero.p.norm(), 0.0);
  const OmaAllocation mixed = oma_powermin(c, (RVec(2) << 0.0, 1.0).finished(), 1.0);
  EXPECT_EQ(mixed.p(0), 0.0);
  EXPECT_GT(mixed.alpha(1), 0.99);
}

TEST(OmaEqualShare, SymmetricMatchesOptimizedAndDominatedOtherwise) {
  const RVec c_sym = (RVec(2) << 2.0, 2.0).finished();
  const RVec r_sym = (RVec(2) << 0.5, 0.5).finished();
  const OmaAllocation opt = oma_powermin(c_sym, r_sym, 1.0);
  const OmaAllocation eq = oma_equal_share(c_sym, r_sym, 1.0);
  EXPECT_NEAR(opt.avg_power, eq.avg_power, 1e-9 * eq.avg_power);

  auto rng = testsupport::rng_for(83);
  for (int t = 0; t < 30; ++t) {
    const int K = 2 + static_cast<int>(testsupport::unif(rng) * 2);
    RVec c(K), r(K);
    for (int k = 0; k < K; ++k) {
      c(k) = std::pow(10.0, testsupport::unif(rng, -1, 1));
      r(k) = testsupport::unif(rng, 0.1, 1.5);
    }
    const OmaAllocation a = oma_powermin(c, r, 1.0);
    const OmaAllocation b = oma_equal_share(c, r, 1.0);
    EXPECT_LE(a.avg_power, b.avg_power * (1.0 + 1e-9));
    for (int k = 0; k < K; ++k)
      EXPECT_NEAR(b.alpha(k) * std::log2(1.0 + b.p(k) * c(k)), r(k), 1e-9 * std::max(1.0, r(k)));
  }
}

TEST(OmaEeMax, SingleUserMatchesGoldenOracle) {
  auto rng = testsupport::rng_for(84);
  for (int t = 0; t < 20; ++t) {
    const RVec c = (RVec(1) << std::pow(10.0, testsupport::unif(rng, -1, 1))).finished();
    const RVec r = (RVec(1) << testsupport::unif(rng, 0.1, 1.5)).finished();
    const double cap = 10.0;
    const OmaAllocation out = oma_ee_max(c, r, 1.0, cap);
    const double p_bind = (std::exp2(r(0)) - 1.0) / c(0);
    const double oracle = testsupport::golden_max_oracle(
        [&](double p) { return std::log2(1.0 + p * c(0)) / p; }, p_bind, cap);
    EXPECT_LE(std::abs(out.ee - oracle), 1e-6 * oracle);
  }
}

TEST(OmaEeMax, DominatesPowerMinAllocation) {
  auto rng = testsupport::rng_for(85);
  for (int t = 0; t < 20; ++t) {
    const int K = 2;
    RVec c(K), r(K);
    for (int k = 0; k < K; ++k) {
      c(k) = std::pow(10.0, testsupport::unif(rng, -0.5, 1.0));
      r(k) = testsupport::unif(rng, 0.1, 0.6);
    }
    const OmaAllocation pm = oma_powermin(c, r, 1.0);
    const OmaAllocation ee = oma_ee_max(c, r, 1.0, 20.0);
    EXPECT_GE(ee.ee, pm.ee * (1.0 - 1e-9));
  }
}

TEST(OmaEeMax, OptimizedFractionsBeatEqualShare) {
  auto rng = testsupport::rng_for(86);
  for (int t = 0; t < 20; ++t) {
    const int K = 2 + static_cast<int>(testsupport::unif(rng) * 2);
    RVec c(K), r(K);
    for (int k = 0; k < K; ++k) {
      c(k) = std::pow(10.0, testsupport::unif(rng, -0.5, 1.0));
      r(k) = testsupport::unif(rng, 0.1, 0.8);
    }
    const OmaAllocation opt = oma_ee_max(c, r, 1.0, 20.0, false);
    const OmaAllocation eq = oma_ee_max(c, r, 1.0, 20.0, true);
    EXPECT_GE(opt.ee, eq.ee * (1.0 - 1e-9));
    EXPECT_NEAR(opt.alpha.sum(), 1.0, 1e-8);
  }
}

TEST(OmaEeMax, RateConstraintsHold) {
  const RVec c = (RVec(3) << 5.0, 2.0, 1.0).finished();
  const RVec r = (RVec(3) << 0.5, 0.4, 0.3).finished();
  const OmaAllocation out = oma_ee_max(c, r, 1.0, 10.0);
  for (int k = 0; k < 3; ++k) {
    const double rate = out.alpha(k) * std::log2(1.0 + out.p(k) * c(k));
    EXPECT_GE(rate, r(k) - 1e-7);
    EXPECT_LE(out.p(k), 10.0 * (1.0 + 1e-9));
  }
}
