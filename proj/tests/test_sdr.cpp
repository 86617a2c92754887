#include "irsnoma/sdr.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "irsnoma/noma_power.hpp"
#include "test_support.hpp"

using namespace irsnoma;

namespace {

ScenarioConfig tiny_config(int K, int L) {
  ScenarioConfig cfg = ScenarioConfig::defaults_for_users(K);
  cfg.L = L;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST(BuildLifted, ZeroDirectLinkZeroesTheBorder) {
  const CVec d = (CVec(3) << cplx(0.2, 0.4), cplx(-0.1, 0.3), cplx(0.5, 0.0)).finished();
  const CMat B = lifted_matrix(d, cplx(0.0, 0.0));
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(B(i, 3), cplx(0.0, 0.0));
    EXPECT_EQ(B(3, i), cplx(0.0, 0.0));
  }
  EXPECT_EQ(B(3, 3), cplx(0.0, 0.0));
}

TEST(BuildLifted, SingleElementSymbolicEntries) {
  // L = 1: z = conj(d); B = [[|d|^2, conj(d) v], [d conj(v), 0]]
  const cplx d(0.6, -0.2), v(0.3, 0.7);
  const CMat B = lifted_matrix((CVec(1) << d).finished(), v);
  EXPECT_NEAR(std::abs(B(0, 0) - cplx(std::norm(d), 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(B(0, 1) - std::conj(d) * v), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(B(1, 0) - d * std::conj(v)), 0.0, 1e-15);
  EXPECT_EQ(B(1, 1), cplx(0.0, 0.0));
  EXPECT_LE((B - B.adjoint()).norm(), 1e-12);
}

TEST(BuildLifted, TraceIdentityMatchesEffectiveGain) {
  auto rng = testsupport::rng_for(51);
  const ScenarioConfig cfg = tiny_config(2, 6);
  const ChannelRealization ch = sample_channels(cfg, 1);
  for (int k = 0; k < ch.users(); ++k) {
    const CMat B = build_lifted(ch, k);
    EXPECT_LE((B - B.adjoint()).norm(), 1e-12 * std::max(1.0, B.norm()));
    for (int rep = 0; rep < 100; ++rep) {
      const CVec w = testsupport::random_unit_phases(rng, cfg.L);
      CVec wbar(cfg.L + 1);
      wbar.head(cfg.L) = w;
      wbar(cfg.L) = 1.0;
      const double lifted = (wbar.adjoint() * B * wbar)(0, 0).real() + std::norm(ch.v(k));
      const double direct = effective_gain(ch, w, k);
      EXPECT_LE(std::abs(lifted - direct), 1e-10 * std::max(direct, 1e-30));
    }
  }
}

TEST(SolveSdpPowermin, IdentityIsFeasibleLowerBound) {
  const ScenarioConfig cfg = tiny_config(1, 4);
  const ChannelRealization ch = sample_channels(cfg, 0);
  std::vector<CMat> B = {build_lifted(ch, 0)};
  const RVec vabs2 = (RVec(1) << std::norm(ch.v(0))).finished();
  const RVec p = (RVec(1) << 1e-5).finished();
  const RVec r = (RVec(1) << 0.2).finished();
  const LiftedSolution sol = solve_sdp_powermin(B, vabs2, p, r, cfg.sigma2);
  ASSERT_TRUE(sol.ok());
  // noise-normalized slack at What = I
  const double growth = std::exp2(0.2) - 1.0;
  const double at_identity =
      p(0) / cfg.sigma2 * (B[0].trace().real() + vabs2(0)) - growth;
  if (at_identity >= 0.0) EXPECT_GE(sol.objective, at_identity - 1e-5 * (1.0 + at_identity));
}

TEST(SolveSdpPowermin, SingleElementMatchesPhaseGrid) {
  const ScenarioConfig cfg = tiny_config(1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelRealization ch = sample_channels(cfg, trial);
    std::vector<CMat> B = {build_lifted(ch, 0)};
    const RVec vabs2 = (RVec(1) << std::norm(ch.v(0))).finished();
    const RVec p = (RVec(1) << 2e-5).finished();
    const RVec r = (RVec(1) << 0.4).finished();
    const LiftedSolution sol = solve_sdp_powermin(B, vabs2, p, r, cfg.sigma2);
    ASSERT_TRUE(sol.ok());

    const double growth = std::exp2(0.4) - 1.0;
    const cplx d = ch.cascade(0)(0);
    const double grid = testsupport::phase_grid_max([&](double theta) {
      const double gain = std::norm(d * std::polar(1.0, theta) + ch.v(0));
      return p(0) * gain / cfg.sigma2 - growth;
    });
    EXPECT_NEAR(sol.objective, grid, 1e-3 * std::max(1.0, std::abs(grid)));
  }
}

TEST(SolveSdpPowermin, OutputSatisfiesConeAndDiagonal) {
  const ScenarioConfig cfg = tiny_config(2, 5);
  const ChannelRealization ch = sample_channels(cfg, 3);
  std::vector<CMat> B;
  RVec vabs2(2);
  for (int k = 0; k < 2; ++k) {
    B.push_back(build_lifted(ch, k));
    vabs2(k) = std::norm(ch.v(k));
  }
  const RVec r = rate_targets_sic(cfg, ch);
  RVec a(2);
  const CVec w0 = CVec::Ones(cfg.L);
  for (int k = 0; k < 2; ++k) a(k) = effective_gain(ch, w0, k);
  const RVec p = solve_power_lp(a, r, cfg.sigma2);
  const LiftedSolution sol = solve_sdp_powermin(B, vabs2, p, r, cfg.sigma2);
  ASSERT_TRUE(sol.ok());
  Eigen::SelfAdjointEigenSolver<CMat> eig(sol.What);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-6 * sol.What.norm());
  for (int i = 0; i < sol.What.rows(); ++i) EXPECT_NEAR(sol.What(i, i).real(), 1.0, 1e-6);
  EXPECT_GE(sol.objective, -1e-8);  // slack variable is cone-constrained
}

TEST(SolveSdpEe, ZeroPowersFeasibleZeroObjective) {
  const ScenarioConfig cfg = tiny_config(2, 4);
  const ChannelRealization ch = sample_channels(cfg, 2);
  std::vector<CMat> B;
  RVec vabs2(2);
  for (int k = 0; k < 2; ++k) {
    B.push_back(build_lifted(ch, k));
    vabs2(k) = std::norm(ch.v(k));
  }
  const RVec p = RVec::Zero(2);
  const RVec r = RVec::Zero(2);
  const LiftedSolution sol = solve_sdp_ee(B, vabs2, p, r, cfg.sigma2);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.objective, 0.0, 1e-8);
}

TEST(SolveSdpEe, SingleElementMatchesPhaseGrid) {
  const ScenarioConfig cfg = tiny_config(1, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const ChannelRealization ch = sample_channels(cfg, trial);
    std::vector<CMat> B = {build_lifted(ch, 0)};
    const RVec vabs2 = (RVec(1) << std::norm(ch.v(0))).finished();
    const RVec p = (RVec(1) << 3e-5).finished();
    const RVec r = (RVec(1) << 0.1).finished();
    const LiftedSolution sol = solve_sdp_ee(B, vabs2, p, r, cfg.sigma2);
    ASSERT_TRUE(sol.ok());
    const cplx d = ch.cascade(0)(0);
    const double grid = testsupport::phase_grid_max([&](double theta) {
      return p(0) * std::norm(d * std::polar(1.0, theta) + ch.v(0)) / cfg.sigma2;
    });
    EXPECT_NEAR(sol.objective, grid, 1e-3 * std::max(1.0, grid));
  }
}

TEST(SolveSdpEe, RelaxationUpperBoundsRankOneCandidates) {
  auto rng = testsupport::rng_for(52);
  const ScenarioConfig cfg = tiny_config(2, 6);
  const ChannelRealization ch = sample_channels(cfg, 4);
  std::vector<CMat> B;
  RVec vabs2(2);
  for (int k = 0; k < 2; ++k) {
    B.push_back(build_lifted(ch, k));
    vabs2(k) = std::norm(ch.v(k));
  }
  const RVec r = rate_targets_sic(cfg, ch);
  RVec a(2);
  const CVec aligned = aligned_phases(ch, 0);
  for (int k = 0; k < 2; ++k) a(k) = effective_gain(ch, aligned, k);
  const RVec p = solve_power_lp(a, r, cfg.sigma2);
  const LiftedSolution sol = solve_sdp_ee(B, vabs2, p, r, cfg.sigma2);
  ASSERT_TRUE(sol.ok());

  // any feasible rank-one candidate must sit below the relaxation optimum
  const auto candidate_value = [&](const CVec& w) {
    double val = 0.0;
    for (int k = 0; k < 2; ++k) val += p(k) * effective_gain(ch, w, k) / cfg.sigma2;
    return val;
  };
  EXPECT_GE(sol.objective, candidate_value(aligned) - 1e-5 * (1.0 + sol.objective));
  // extracted vector is itself such a candidate
  const CVec extracted = extract_rank_one(sol.What);
  EXPECT_GE(sol.objective, candidate_value(extracted) - 1e-5 * (1.0 + sol.objective));
}

TEST(ExtractRankOne, RecoversExactRankOneInput) {
  auto rng = testsupport::rng_for(53);
  for (int trial = 0; trial < 30; ++trial) {
    const int L = 2 + static_cast<int>(testsupport::unif(rng) * 8);
    const CVec w = testsupport::random_unit_phases(rng, L);
    CVec wbar(L + 1);
    wbar.head(L) = w;
    wbar(L) = 1.0;
    const CMat What = wbar * wbar.adjoint();
    const CVec rec = extract_rank_one(What);
    ASSERT_EQ(rec.size(), L);
    for (int i = 0; i < L; ++i) EXPECT_NEAR(std::abs(rec(i) - w(i)), 0.0, 1e-10);
  }
}

TEST(ExtractRankOne, DegenerateIdentityStillValid) {
  const CMat What = CMat::Identity(5, 5);
  const CVec w = extract_rank_one(What);
  ASSERT_EQ(w.size(), 4);
  EXPECT_TRUE(is_unit_modulus(w, 1e-12));
}

TEST(ExtractRankOne, GlobalPhaseFixedAgainstLastEntry) {
  auto rng = testsupport::rng_for(54);
  const int L = 4;
  const CVec w = testsupport::random_unit_phases(rng, L);
  CVec wbar(L + 1);
  wbar.head(L) = w;
  wbar(L) = 1.0;
  // rotate the whole lifted vector by a random global phase; extraction must undo it
  const CVec rotated = std::polar(1.0, 1.234) * wbar;
  const CMat What = rotated * rotated.adjoint();
  const CVec rec = extract_rank_one(What);
  for (int i = 0; i < L; ++i) EXPECT_NEAR(std::abs(rec(i) - w(i)), 0.0, 1e-10);
}
