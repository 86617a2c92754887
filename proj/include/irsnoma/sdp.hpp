#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "irsnoma/scenario.hpp"

namespace irsnoma::sdp {

// Small dense primal-dual interior-point solver for block-diagonal complex
// Hermitian SDPs in standard primal form:
//
//   min  sum_b <C_b, X_b>   s.t.  sum_b <A_i^b, X_b> = rhs_i,  X_b >= 0,
//
// with <A, B> = Re tr(A B) for Hermitian arguments. Search direction is the
// XZ (HKM) one with a Mehrotra predictor-corrector. Constraint rows and the
// objective are equilibrated internally; reported quantities are unscaled.
// Intended for the beamforming problem sizes here (blocks up to ~65).

struct ConstraintTerm {
  int block = 0;
  int singleton = -1;  // when >= 0 the term is e_s e_s^H and A stays empty
  CMat A;

  static ConstraintTerm dense(int block, CMat a) {
    ConstraintTerm t;
    t.block = block;
    t.A = std::move(a);
    return t;
  }
  static ConstraintTerm diag_unit(int block, int index) {
    ConstraintTerm t;
    t.block = block;
    t.singleton = index;
    return t;
  }
};

struct Constraint {
  std::vector<ConstraintTerm> terms;
  double rhs = 0.0;
};

struct Problem {
  std::vector<int> block_dims;
  std::vector<CMat> C;  // one per block; empty matrix means zero
  std::vector<Constraint> constraints;
};

struct Params {
  double tol = 1e-7;
  int max_iters = 100;
};

enum class Status { optimal, max_iters, failure };

struct Solution {
  std::vector<CMat> X;
  std::vector<CMat> Z;
  RVec y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double rel_primal_residual = 0.0;
  double rel_dual_residual = 0.0;
  double rel_gap = 0.0;
  int iterations = 0;
  Status status = Status::failure;

  bool ok() const { return status == Status::optimal; }
};

namespace detail {

inline double trprod(const CMat& a, const CMat& b) {  // Re tr(a*b)
  return a.cwiseProduct(b.transpose()).sum().real();
}

inline double herm_inner(const ConstraintTerm& t, const CMat& x) {
  if (t.singleton >= 0) return x(t.singleton, t.singleton).real();
  return trprod(t.A, x);
}

// Largest step alpha with P + alpha*D psd, computed from the minimum
// eigenvalue of L^-1 D L^-H where P = L L^H. Returns +inf when D keeps P in
// the cone for every step.
inline double max_psd_step(const CMat& p, const CMat& d) {
  if (p.rows() == 1) {
    const double pv = p(0, 0).real(), dv = d(0, 0).real();
    return dv >= 0 ? std::numeric_limits<double>::infinity() : -pv / dv;
  }
  Eigen::LLT<CMat> llt(p);
  if (llt.info() != Eigen::Success) return 0.0;
  CMat b = llt.matrixL().solve(d);
  b = llt.matrixL().solve(b.adjoint().eval()).adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (b + b.adjoint()), Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

inline bool is_pd(const CMat& p) {
  if (p.rows() == 1) return p(0, 0).real() > 0.0;
  Eigen::LLT<CMat> llt(p);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

inline Solution solve(const Problem& prob, const Params& params = {}) {
  const int nblocks = static_cast<int>(prob.block_dims.size());
  const int m = static_cast<int>(prob.constraints.size());
  if (nblocks == 0 || m == 0) throw std::invalid_argument("sdp: empty problem");

  // --- scaled working copies ---------------------------------------------
  std::vector<CMat> C(static_cast<std::size_t>(nblocks));
  double c_norm = 0.0;
  for (int b = 0; b < nblocks; ++b) {
    const int n = prob.block_dims[static_cast<std::size_t>(b)];
    C[static_cast<std::size_t>(b)] =
        (b < static_cast<int>(prob.C.size()) && prob.C[static_cast<std::size_t>(b)].size() > 0)
            ? prob.C[static_cast<std::size_t>(b)]
            : CMat::Zero(n, n);
    c_norm = std::max(c_norm, C[static_cast<std::size_t>(b)].norm());
  }
  const double c_scale = std::max(1.0, c_norm);
  for (auto& cb : C) cb /= c_scale;

  RVec row_scale(m), rhs(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (const auto& t : prob.constraints[static_cast<std::size_t>(i)].terms)
      s = std::max(s, t.singleton >= 0 ? 1.0 : t.A.norm());
    row_scale(i) = std::max(s, 1e-12);
    rhs(i) = prob.constraints[static_cast<std::size_t>(i)].rhs / row_scale(i);
  }
  // Terms are used through this lambda so the 1/row_scale factor applies
  // without copying the matrices.
  const auto term_weight = [&](int i) { return 1.0 / row_scale(i); };

  const double rhs_norm = 1.0 + rhs.norm();
  double c_fro = 0.0;
  for (const auto& cb : C) c_fro += cb.squaredNorm();
  const double dual_norm = 1.0 + std::sqrt(c_fro);

  // --- state ---------------------------------------------------------------
  int total_dim = 0;
  for (int n : prob.block_dims) total_dim += n;
  const double xi_p = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  const double xi_d = 1.0 + c_norm / c_scale;

  std::vector<CMat> X, Z;
  for (int b = 0; b < nblocks; ++b) {
    const int n = prob.block_dims[static_cast<std::size_t>(b)];
    X.push_back(xi_p * CMat::Identity(n, n));
    Z.push_back(xi_d * CMat::Identity(n, n));
  }
  RVec y = RVec::Zero(m);

  Solution sol;
  sol.y = RVec::Zero(m);

  const auto apply_A = [&](const std::vector<CMat>& xs) {
    RVec out(m);
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (const auto& t : prob.constraints[static_cast<std::size_t>(i)].terms)
        acc += detail::herm_inner(t, xs[static_cast<std::size_t>(t.block)]);
      out(i) = acc * term_weight(i);
    }
    return out;
  };
  const auto apply_At = [&](const RVec& yy) {
    std::vector<CMat> out;
    for (int b = 0; b < nblocks; ++b) {
      const int n = prob.block_dims[static_cast<std::size_t>(b)];
      out.push_back(CMat::Zero(n, n));
    }
    for (int i = 0; i < m; ++i) {
      const double w = yy(i) * term_weight(i);
      if (w == 0.0) continue;
      for (const auto& t : prob.constraints[static_cast<std::size_t>(i)].terms) {
        if (t.singleton >= 0)
          out[static_cast<std::size_t>(t.block)](t.singleton, t.singleton) += w;
        else
          out[static_cast<std::size_t>(t.block)] += w * t.A;
      }
    }
    return out;
  };

  const auto finalize = [&](Status st, int iters) {
    sol.status = st;
    sol.iterations = iters;
    sol.X = X;
    sol.y = RVec(m);
    for (int i = 0; i < m; ++i) sol.y(i) = c_scale * y(i) / row_scale(i);
    sol.Z.clear();
    for (int b = 0; b < nblocks; ++b) sol.Z.push_back(c_scale * Z[static_cast<std::size_t>(b)]);
    double pobj = 0.0;
    for (int b = 0; b < nblocks; ++b) {
      const CMat& corig =
          (b < static_cast<int>(prob.C.size()) && prob.C[static_cast<std::size_t>(b)].size() > 0)
              ? prob.C[static_cast<std::size_t>(b)]
              : CMat();
      if (corig.size() > 0) pobj += detail::trprod(corig, X[static_cast<std::size_t>(b)]);
    }
    sol.primal_objective = pobj;
    double dobj = 0.0;
    for (int i = 0; i < m; ++i) dobj += prob.constraints[static_cast<std::size_t>(i)].rhs * sol.y(i);
    sol.dual_objective = dobj;
    return sol;
  };

  // Dense-term bookkeeping per block for the Schur assembly.
  struct DenseRef {
    int constraint;
    const CMat* A;
  };
  std::vector<std::vector<DenseRef>> dense_terms(static_cast<std::size_t>(nblocks));
  std::vector<std::vector<std::pair<int, int>>> singleton_terms(static_cast<std::size_t>(nblocks));
  for (int i = 0; i < m; ++i)
    for (const auto& t : prob.constraints[static_cast<std::size_t>(i)].terms) {
      if (t.singleton >= 0)
        singleton_terms[static_cast<std::size_t>(t.block)].push_back({i, t.singleton});
      else
        dense_terms[static_cast<std::size_t>(t.block)].push_back({i, &t.A});
    }

  int iter = 0;
  for (; iter < params.max_iters; ++iter) {
    // residuals and convergence
    RVec rp = rhs - apply_A(X);
    std::vector<CMat> At_y = apply_At(y);
    std::vector<CMat> Rd;
    double rd_norm2 = 0.0;
    for (int b = 0; b < nblocks; ++b) {
      Rd.push_back(C[static_cast<std::size_t>(b)] - Z[static_cast<std::size_t>(b)] -
                   At_y[static_cast<std::size_t>(b)]);
      rd_norm2 += Rd.back().squaredNorm();
    }
    double xz = 0.0, pobj = 0.0;
    for (int b = 0; b < nblocks; ++b) {
      xz += detail::trprod(X[static_cast<std::size_t>(b)], Z[static_cast<std::size_t>(b)]);
      pobj += detail::trprod(C[static_cast<std::size_t>(b)], X[static_cast<std::size_t>(b)]);
    }
    const double dobj = rhs.dot(y);
    const double mu = xz / total_dim;

    sol.rel_primal_residual = rp.norm() / rhs_norm;
    sol.rel_dual_residual = std::sqrt(rd_norm2) / dual_norm;
    sol.rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (!std::isfinite(mu) || !std::isfinite(sol.rel_primal_residual)) return finalize(Status::failure, iter);
    if (sol.rel_primal_residual <= params.tol && sol.rel_dual_residual <= params.tol &&
        sol.rel_gap <= params.tol)
      return finalize(Status::optimal, iter);

    // inverses of Z per block
    std::vector<CMat> Zi;
    for (int b = 0; b < nblocks; ++b) {
      const CMat& zb = Z[static_cast<std::size_t>(b)];
      if (zb.rows() == 1) {
        CMat zi(1, 1);
        if (zb(0, 0).real() <= 0.0) return finalize(Status::failure, iter);
        zi(0, 0) = 1.0 / zb(0, 0).real();
        Zi.push_back(zi);
      } else {
        Eigen::LLT<CMat> llt(zb);
        if (llt.info() != Eigen::Success) return finalize(Status::failure, iter);
        Zi.push_back(llt.solve(CMat::Identity(zb.rows(), zb.cols())));
      }
    }

    // Schur complement S_ij = Re tr(A_i X A_j Zi), assembled blockwise with
    // G_j = X A_j Zi cached for dense terms and closed forms for diagonal
    // singletons.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
    std::vector<std::vector<CMat>> G(static_cast<std::size_t>(nblocks));
    for (int b = 0; b < nblocks; ++b) {
      const CMat& Xb = X[static_cast<std::size_t>(b)];
      const CMat& Zib = Zi[static_cast<std::size_t>(b)];
      const auto& dts = dense_terms[static_cast<std::size_t>(b)];
      const auto& sts = singleton_terms[static_cast<std::size_t>(b)];
      auto& Gb = G[static_cast<std::size_t>(b)];
      Gb.reserve(dts.size());
      for (const auto& dt : dts) Gb.push_back(Xb * (*dt.A) * Zib);

      for (std::size_t a = 0; a < dts.size(); ++a)
        for (std::size_t c = 0; c < dts.size(); ++c)
          S(dts[a].constraint, dts[c].constraint) +=
              detail::trprod(*dts[a].A, Gb[c]) * term_weight(dts[a].constraint) *
              term_weight(dts[c].constraint);
      for (std::size_t a = 0; a < dts.size(); ++a)
        for (const auto& st : sts) {
          // dense row against singleton column and vice versa
          S(dts[a].constraint, st.first) += Gb[a](st.second, st.second).real() *
                                            term_weight(dts[a].constraint) * term_weight(st.first);
          S(st.first, dts[a].constraint) += Gb[a](st.second, st.second).real() *
                                            term_weight(st.first) * term_weight(dts[a].constraint);
        }
      for (const auto& s1 : sts)
        for (const auto& s2 : sts)
          S(s1.first, s2.first) +=
              (Xb(s1.second, s2.second) * Zib(s2.second, s1.second)).real() *
              term_weight(s1.first) * term_weight(s2.first);
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(S + 1e-14 * S.diagonal().cwiseAbs().maxCoeff() *
                                                    Eigen::MatrixXd::Identity(m, m));

    const auto solve_direction = [&](double nu, const std::vector<CMat>* corr,
                                     std::vector<CMat>& dX, std::vector<CMat>& dZ, RVec& dy) {
      std::vector<CMat> M;
      for (int b = 0; b < nblocks; ++b) {
        const CMat& Xb = X[static_cast<std::size_t>(b)];
        const CMat& Zib = Zi[static_cast<std::size_t>(b)];
        CMat Mb = Xb + Xb * Rd[static_cast<std::size_t>(b)] * Zib - nu * Zib;
        if (corr) Mb += (*corr)[static_cast<std::size_t>(b)] * Zib;
        M.push_back(std::move(Mb));
      }
      RVec rhs_vec = rp;
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (const auto& t : prob.constraints[static_cast<std::size_t>(i)].terms) {
          const CMat& Mb = M[static_cast<std::size_t>(t.block)];
          acc += t.singleton >= 0 ? Mb(t.singleton, t.singleton).real() : detail::trprod(t.A, Mb);
        }
        rhs_vec(i) += acc * term_weight(i);
      }
      dy = lu.solve(rhs_vec);
      std::vector<CMat> At_dy = apply_At(dy);
      dX.clear();
      dZ.clear();
      for (int b = 0; b < nblocks; ++b) {
        CMat dz = Rd[static_cast<std::size_t>(b)] - At_dy[static_cast<std::size_t>(b)];
        const CMat& Xb = X[static_cast<std::size_t>(b)];
        const CMat& Zib = Zi[static_cast<std::size_t>(b)];
        CMat rc = -Xb * Z[static_cast<std::size_t>(b)];
        if (nu != 0.0) rc += nu * CMat::Identity(Xb.rows(), Xb.cols());
        if (corr) rc -= (*corr)[static_cast<std::size_t>(b)];
        CMat dx = rc * Zib - Xb * dz * Zib;
        dx = 0.5 * (dx + dx.adjoint()).eval();
        dX.push_back(std::move(dx));
        dZ.push_back(std::move(dz));
      }
    };

    const auto max_step = [&](const std::vector<CMat>& base, const std::vector<CMat>& dir) {
      double a = 1.0;
      for (int b = 0; b < nblocks; ++b)
        a = std::min(a, 0.98 * detail::max_psd_step(base[static_cast<std::size_t>(b)],
                                                    dir[static_cast<std::size_t>(b)]));
      return a;
    };

    // predictor
    std::vector<CMat> dX_aff, dZ_aff;
    RVec dy_aff;
    solve_direction(0.0, nullptr, dX_aff, dZ_aff, dy_aff);
    const double ap_aff = max_step(X, dX_aff);
    const double ad_aff = max_step(Z, dZ_aff);
    double xz_aff = 0.0;
    for (int b = 0; b < nblocks; ++b)
      xz_aff += detail::trprod(X[static_cast<std::size_t>(b)] + ap_aff * dX_aff[static_cast<std::size_t>(b)],
                               Z[static_cast<std::size_t>(b)] + ad_aff * dZ_aff[static_cast<std::size_t>(b)]);
    const double mu_aff = std::max(xz_aff / total_dim, 0.0);
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // corrector
    std::vector<CMat> corr;
    for (int b = 0; b < nblocks; ++b)
      corr.push_back(dX_aff[static_cast<std::size_t>(b)] * dZ_aff[static_cast<std::size_t>(b)]);
    std::vector<CMat> dX, dZ;
    RVec dy;
    solve_direction(sigma * mu, &corr, dX, dZ, dy);

    double ap = max_step(X, dX);
    double ad = max_step(Z, dZ);

    // apply with positive-definiteness backoff
    bool applied = false;
    for (int attempt = 0; attempt < 12 && !applied; ++attempt) {
      bool good = true;
      for (int b = 0; b < nblocks && good; ++b) {
        CMat xn = X[static_cast<std::size_t>(b)] + ap * dX[static_cast<std::size_t>(b)];
        CMat zn = Z[static_cast<std::size_t>(b)] + ad * dZ[static_cast<std::size_t>(b)];
        good = detail::is_pd(xn) && detail::is_pd(zn);
      }
      if (good) {
        for (int b = 0; b < nblocks; ++b) {
          X[static_cast<std::size_t>(b)] += ap * dX[static_cast<std::size_t>(b)];
          Z[static_cast<std::size_t>(b)] += ad * dZ[static_cast<std::size_t>(b)];
        }
        y += ad * dy;
        applied = true;
      } else {
        ap *= 0.7;
        ad *= 0.7;
      }
    }
    if (!applied) return finalize(Status::failure, iter);
  }

  // final convergence check at the iteration cap
  RVec rp = rhs - apply_A(X);
  sol.rel_primal_residual = rp.norm() / rhs_norm;
  return finalize(sol.rel_primal_residual <= params.tol && sol.rel_dual_residual <= params.tol &&
                          sol.rel_gap <= params.tol
                      ? Status::optimal
                      : Status::max_iters,
                  iter);
}

}  // namespace irsnoma::sdp
