#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "irsnoma/scenario.hpp"
#include "irsnoma/sdp.hpp"

namespace irsnoma {

// Semidefinite-relaxation beamforming baseline. The effective channel power
// |d^T w + v|^2 is lifted to trace(B what what^H) + |v|^2 with what = [w; 1],
// the relaxed SDP is solved over unit-diagonal PSD matrices, and a
// unit-modulus vector is recovered from the dominant eigenpair.

/// Lifted Hermitian matrix for one cascade/direct pair:
/// B = [z z^H, z v; z^H conj(v), 0] with z = conj(d).
inline CMat lifted_matrix(const CVec& d, cplx v) {
  const int L = static_cast<int>(d.size());
  const CVec z = d.conjugate();
  CMat B = CMat::Zero(L + 1, L + 1);
  B.topLeftCorner(L, L) = z * z.adjoint();
  B.topRightCorner(L, 1) = z * v;
  B.bottomLeftCorner(1, L) = (z * v).adjoint();
  return B;
}

/// Lifted matrix for user k of a channel realization (raw units).
inline CMat build_lifted(const ChannelRealization& ch, int k) {
  return lifted_matrix(ch.cascade(k), ch.v(k));
}

struct LiftedSolution {
  CMat What;           // (L+1)x(L+1) PSD, unit diagonal
  double objective = 0.0;  // noise-normalized slack / weighted gain
  sdp::Status status = sdp::Status::failure;

  bool ok() const { return status == sdp::Status::optimal; }
};

namespace detail {

struct LiftedProblemData {
  std::vector<CMat> M;  // per-constraint matrices on the lifted block
  RVec r;               // constraint constants
  int n = 0;            // lifted dimension L+1
};

// Noise-normalized constraint data: C_k(What) = <M_k, What> - r_k with all
// quantities dimensionless.
inline LiftedProblemData lifted_constraints(const std::vector<CMat>& B, const RVec& vabs2,
                                            const RVec& p, const RVec& r_min, double sigma2) {
  const int K = static_cast<int>(B.size());
  if (vabs2.size() != K || p.size() != K || r_min.size() != K)
    throw std::invalid_argument("sdr: mismatched user dimensions");
  if (sigma2 <= 0) throw std::domain_error("sdr: sigma2 must be > 0");
  LiftedProblemData out;
  out.n = static_cast<int>(B[0].rows());
  out.M.reserve(static_cast<std::size_t>(K));
  out.r.resize(K);
  const double inv_s = 1.0 / sigma2;
  for (int k = 0; k < K; ++k) {
    const double growth = std::exp2(r_min(k)) - 1.0;
    CMat Mk = p(k) * inv_s * B[static_cast<std::size_t>(k)];
    double rk = -p(k) * inv_s * vabs2(k) + growth;
    for (int j = k + 1; j < K; ++j) {
      Mk -= growth * p(j) * inv_s * B[static_cast<std::size_t>(j)];
      rk += growth * p(j) * inv_s * vabs2(j);
    }
    out.M.push_back(0.5 * (Mk + Mk.adjoint()).eval());  // keep exactly Hermitian
    out.r(k) = rk;
  }
  return out;
}

}  // namespace detail

/// Max-min-slack SDP for the power-minimization phase step: maximize alpha
/// subject to C_k(What) >= alpha, unit diagonal, What PSD, alpha >= 0.
/// B and vabs2 are raw-unit inputs; the reported objective (the slack) is
/// noise-normalized.
inline LiftedSolution solve_sdp_powermin(const std::vector<CMat>& B, const RVec& vabs2,
                                         const RVec& p, const RVec& r_min, double sigma2,
                                         const sdp::Params& params = {}) {
  const auto data = detail::lifted_constraints(B, vabs2, p, r_min, sigma2);
  const int K = static_cast<int>(data.M.size());
  const int n = data.n;

  sdp::Problem prob;
  prob.block_dims = {n, 1};  // lifted block, alpha
  for (int k = 0; k < K; ++k) prob.block_dims.push_back(1);  // slacks
  prob.C.resize(prob.block_dims.size());
  prob.C[1] = -CMat::Identity(1, 1);  // min -alpha

  CMat minus_one = -CMat::Identity(1, 1);
  for (int k = 0; k < K; ++k) {
    sdp::Constraint con;
    con.terms.push_back(sdp::ConstraintTerm::dense(0, data.M[static_cast<std::size_t>(k)]));
    con.terms.push_back(sdp::ConstraintTerm::dense(1, minus_one));
    con.terms.push_back(sdp::ConstraintTerm::dense(2 + k, minus_one));
    con.rhs = data.r(k);
    prob.constraints.push_back(std::move(con));
  }
  for (int i = 0; i < n; ++i) {
    sdp::Constraint con;
    con.terms.push_back(sdp::ConstraintTerm::diag_unit(0, i));
    con.rhs = 1.0;
    prob.constraints.push_back(std::move(con));
  }

  const sdp::Solution s = sdp::solve(prob, params);
  LiftedSolution out;
  out.status = s.status;
  if (s.X.size() >= 2) {
    out.What = s.X[0];
    out.objective = s.X[1](0, 0).real();
  }
  return out;
}

/// Relaxed weighted-gain SDP for the EE phase step: maximize
/// sum_k p_k (trace(B_k What) + |v_k|^2) under the rate constraints, unit
/// diagonal and PSD. Objective reported noise-normalized.
inline LiftedSolution solve_sdp_ee(const std::vector<CMat>& B, const RVec& vabs2, const RVec& p,
                                   const RVec& r_min, double sigma2,
                                   const sdp::Params& params = {}) {
  const auto data = detail::lifted_constraints(B, vabs2, p, r_min, sigma2);
  const int K = static_cast<int>(data.M.size());
  const int n = data.n;
  const double inv_s = 1.0 / sigma2;

  CMat obj = CMat::Zero(n, n);
  double constant = 0.0;
  for (int k = 0; k < K; ++k) {
    obj += p(k) * inv_s * B[static_cast<std::size_t>(k)];
    constant += p(k) * inv_s * vabs2(k);
  }
  obj = 0.5 * (obj + obj.adjoint()).eval();

  sdp::Problem prob;
  prob.block_dims = {n};
  for (int k = 0; k < K; ++k) prob.block_dims.push_back(1);
  prob.C.resize(prob.block_dims.size());
  prob.C[0] = -obj;  // maximize

  CMat minus_one = -CMat::Identity(1, 1);
  for (int k = 0; k < K; ++k) {
    sdp::Constraint con;
    con.terms.push_back(sdp::ConstraintTerm::dense(0, data.M[static_cast<std::size_t>(k)]));
    con.terms.push_back(sdp::ConstraintTerm::dense(1 + k, minus_one));
    con.rhs = data.r(k);
    prob.constraints.push_back(std::move(con));
  }
  for (int i = 0; i < n; ++i) {
    sdp::Constraint con;
    con.terms.push_back(sdp::ConstraintTerm::diag_unit(0, i));
    con.rhs = 1.0;
    prob.constraints.push_back(std::move(con));
  }

  const sdp::Solution s = sdp::solve(prob, params);
  LiftedSolution out;
  out.status = s.status;
  if (!s.X.empty()) {
    out.What = s.X[0];
    out.objective = sdp::detail::trprod(obj, s.X[0]) + constant;
  }
  return out;
}

/// Recovers a unit-modulus phase vector from a lifted solution: dominant
/// eigenpair, global phase fixed so the last (slack-one) entry is real
/// positive, last entry dropped, elements normalized. Falls back to the
/// largest-magnitude entry as the phase reference when the last entry is
/// numerically zero.
inline CVec extract_rank_one(const CMat& What) {
  const int n = static_cast<int>(What.rows());
  Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (What + What.adjoint()));
  const double lam = std::max(eig.eigenvalues()(n - 1), 0.0);
  CVec what = std::sqrt(lam) * eig.eigenvectors().col(n - 1);

  int ref = n - 1;
  if (std::abs(what(n - 1)) < 1e-12 * what.norm()) {
    double best = -1.0;
    for (int i = 0; i < n; ++i)
      if (std::abs(what(i)) > best) {
        best = std::abs(what(i));
        ref = i;
      }
  }
  const double phase = std::arg(what(ref));
  what *= std::polar(1.0, -phase);

  CVec w(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    const double mag = std::abs(what(i));
    w(i) = mag > 1e-300 ? what(i) / mag : cplx(1.0, 0.0);
  }
  return w;
}

/// One SDR beamforming step for the power-min alternation. Empty on solver
/// failure; callers keep the previous phases.
inline std::optional<CVec> sdr_beamform_powermin(const ChannelRealization& ch, const RVec& p,
                                                 const RVec& r_min, double sigma2,
                                                 const sdp::Params& params = {}) {
  std::vector<CMat> B;
  RVec vabs2(ch.users());
  for (int k = 0; k < ch.users(); ++k) {
    B.push_back(build_lifted(ch, k));
    vabs2(k) = std::norm(ch.v(k));
  }
  const LiftedSolution sol = solve_sdp_powermin(B, vabs2, p, r_min, sigma2, params);
  if (!sol.ok()) return std::nullopt;
  return extract_rank_one(sol.What);
}

/// One SDR beamforming step for the EE alternation.
inline std::optional<CVec> sdr_beamform_ee(const ChannelRealization& ch, const RVec& p,
                                           const RVec& r_min, double sigma2,
                                           const sdp::Params& params = {}) {
  std::vector<CMat> B;
  RVec vabs2(ch.users());
  for (int k = 0; k < ch.users(); ++k) {
    B.push_back(build_lifted(ch, k));
    vabs2(k) = std::norm(ch.v(k));
  }
  const LiftedSolution sol = solve_sdp_ee(B, vabs2, p, r_min, sigma2, params);
  if (!sol.ok()) return std::nullopt;
  return extract_rank_one(sol.What);
}

}  // namespace irsnoma
