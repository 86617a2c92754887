#include "irsnoma/ccm.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace irsnoma;

TEST(ProjectTangent, FullyNormalDirectionVanishes) {
  const CVec w = CVec::Ones(1);
  const CVec v = CVec::Ones(1);
  EXPECT_NEAR(project_tangent(w, v).norm(), 0.0, 1e-15);
}

TEST(ProjectTangent, TangentDirectionUnchanged) {
  const CVec w = CVec::Ones(1);
  const CVec v = (CVec(1) << cplx(0.0, 1.0)).finished();
  EXPECT_NEAR((project_tangent(w, v) - v).norm(), 0.0, 1e-15);
}

TEST(ProjectTangent, IdempotentLinearNonExpansive) {
  auto rng = testsupport::rng_for(5);
  for (int t = 0; t < 300; ++t) {
    const CVec w = testsupport::random_unit_phases(rng, 8);
    const CVec v = testsupport::random_cvec(rng, 8);
    const CVec once = project_tangent(w, v);
    EXPECT_TRUE(is_tangent_at(w, once));
    EXPECT_NEAR((project_tangent(w, once) - once).norm(), 0.0, 1e-12);
    EXPECT_LE(once.norm(), v.norm() * (1.0 + 1e-12));
    const CVec u = testsupport::random_cvec(rng, 8);
    const CVec sum = project_tangent(w, v + 2.0 * u);
    EXPECT_NEAR((sum - once - 2.0 * project_tangent(w, u)).norm(), 0.0, 1e-12);
  }
}

TEST(Retract, ZeroStepIsIdentity) {
  auto rng = testsupport::rng_for(6);
  const CVec w = testsupport::random_unit_phases(rng, 5);
  EXPECT_NEAR((retract(w, CVec::Zero(5)) - w).norm(), 0.0, 0.0);
}

TEST(Retract, ClosedFormOnSingleCircle) {
  const CVec w = CVec::Ones(1);
  const double t = 0.37;
  const CVec xi = (CVec(1) << cplx(0.0, t)).finished();
  const CVec out = retract(w, xi);
  const cplx expected = cplx(1.0, t) / std::sqrt(1.0 + t * t);
  EXPECT_NEAR(std::abs(out(0) - expected), 0.0, 1e-15);
}

TEST(Retract, UnitModulusToMachinePrecision) {
  auto rng = testsupport::rng_for(7);
  for (int t = 0; t < 300; ++t) {
    const CVec w = testsupport::random_unit_phases(rng, 6);
    const CVec xi = project_tangent(w, testsupport::random_cvec(rng, 6, 2.0));
    const CVec out = retract(w, xi);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(std::abs(out(i)), 1.0, 1e-14);
  }
}

TEST(Retract, SignalsCancellation) {
  const CVec w = CVec::Ones(1);
  const CVec xi = (CVec(1) << cplx(-1.0, 0.0)).finished();  // not tangent; lands on the origin
  EXPECT_THROW(retract(w, xi), RetractionError);
}

TEST(RiemannianGrad, TangentInputUnchangedRadialKilled) {
  auto rng = testsupport::rng_for(8);
  const CVec w = testsupport::random_unit_phases(rng, 4);
  const CVec tangent = project_tangent(w, testsupport::random_cvec(rng, 4));
  EXPECT_NEAR((riemannian_grad(w, tangent) - tangent).norm(), 0.0, 1e-13);
  const CVec radial = 2.7 * w;  // elementwise real multiple of w is pure normal
  EXPECT_NEAR(riemannian_grad(w, radial).norm(), 0.0, 1e-13);
}

TEST(RiemannianGrad, MatchesDirectionalDerivative) {
  // directional derivative of f along a retracted tangent curve equals
  // Re(<rgrad, eta>), checked with central differences
  auto rng = testsupport::rng_for(9);
  const int L = 6;
  const CVec c = testsupport::random_cvec(rng, L);
  const auto f = [&c](const CVec& w) { return -(c.dot(w)).real(); };  // c.dot conjugates c
  const CVec egrad_analytic = -c;  // d/dRe + j d/dIm of -Re(c^H w)

  for (int t = 0; t < 50; ++t) {
    const CVec w = testsupport::random_unit_phases(rng, L);
    const CVec eta = project_tangent(w, testsupport::random_cvec(rng, L));
    const CVec rg = riemannian_grad(w, egrad_analytic);
    const double h = 1e-6;
    const double fd = (f(retract(w, h * eta)) - f(retract(w, -h * eta))) / (2.0 * h);
    const double inner = (rg.conjugate().cwiseProduct(eta)).sum().real();
    EXPECT_NEAR(fd, inner, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(CcmMinimize, LinearFormAlignsPhases) {
  auto rng = testsupport::rng_for(10);
  const int L = 12;
  CVec c = testsupport::random_cvec(rng, L);
  for (int i = 0; i < L; ++i)
    if (std::abs(c(i)) < 0.1) c(i) += cplx(0.5, 0.5);
  const auto objective = [&c](const CVec& w) {
    return std::make_pair(-(c.dot(w)).real(), CVec(-c));
  };
  CcmSolverParams prm;
  prm.grad_tol = 1e-9;
  prm.max_iters = 2000;
  const CVec w0 = testsupport::random_unit_phases(rng, L);
  const auto [w, trace] = ccm_minimize(objective, w0, prm);
  EXPECT_EQ(trace.status, SolveStatus::converged);
  for (int i = 0; i < L; ++i) {
    const cplx target = c(i) / std::abs(c(i));
    EXPECT_NEAR(std::abs(w(i) - target), 0.0, 1e-6);
  }
}

TEST(CcmMinimize, ConstantObjectiveStopsImmediately) {
  const auto objective = [](const CVec& w) { return std::make_pair(1.0, CVec(CVec::Zero(w.size()))); };
  const CVec w0 = CVec::Ones(4);
  const auto [w, trace] = ccm_minimize(objective, w0);
  EXPECT_EQ(trace.status, SolveStatus::converged);
  EXPECT_EQ(trace.entries.size(), 1u);
  EXPECT_NEAR((w - w0).norm(), 0.0, 0.0);
}

TEST(CcmMinimize, QuadraticDistanceToOnes) {
  auto rng = testsupport::rng_for(11);
  const auto objective = [](const CVec& w) {
    const CVec ones = CVec::Ones(w.size());
    return std::make_pair((w - ones).squaredNorm(), CVec(2.0 * (w - ones)));
  };
  CcmSolverParams prm;
  prm.grad_tol = 1e-10;
  prm.max_iters = 5000;
  const CVec w0 = testsupport::random_unit_phases(rng, 5);
  const auto [w, trace] = ccm_minimize(objective, w0, prm);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(std::abs(w(i) - cplx(1.0, 0.0)), 0.0, 1e-5);
}

TEST(CcmMinimize, MonotoneDescentAndFeasibleIterates) {
  auto rng = testsupport::rng_for(12);
  const int L = 10;
  const CVec c = testsupport::random_cvec(rng, L, 1.5);
  const CMat A = [&] {
    const CMat B = testsupport::random_cvec(rng, L * L).reshaped(L, L);
    return CMat(0.5 * (B + B.adjoint()));
  }();
  const auto objective = [&](const CVec& w) {
    const CVec Aw = A * w;
    const double val = (w.dot(Aw)).real() - 2.0 * (c.dot(w)).real();
    return std::make_pair(val, CVec(2.0 * Aw - 2.0 * c));
  };
  const CVec w0 = testsupport::random_unit_phases(rng, L);
  const auto [w, trace] = ccm_minimize(objective, w0);
  ASSERT_GE(trace.entries.size(), 2u);
  for (std::size_t i = 1; i < trace.entries.size(); ++i)
    EXPECT_LE(trace.entries[i].objective, trace.entries[i - 1].objective + 1e-12);
  EXPECT_TRUE(is_unit_modulus(w));
}

TEST(CcmMinimize, RejectsNonFinite) {
  const auto objective = [](const CVec& w) {
    return std::make_pair(std::numeric_limits<double>::quiet_NaN(), CVec(CVec::Zero(w.size())));
  };
  EXPECT_THROW(ccm_minimize(objective, CVec::Ones(2)), std::runtime_error);
}

TEST(CcmMinimize, RejectsOffManifoldStart) {
  const auto objective = [](const CVec& w) { return std::make_pair(0.0, CVec(CVec::Zero(w.size()))); };
  CVec w0 = CVec::Ones(2);
  w0(0) = cplx(2.0, 0.0);
  EXPECT_THROW(ccm_minimize(objective, w0), std::invalid_argument);
}
