#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "irsnoma/scenario.hpp"

namespace irsnoma {

// Geometry of the product of L unit circles in C^L, plus a first-order
// descent solver. Points are complex vectors with |w_i| = 1; tangent vectors
// at w satisfy Re(xi_i * conj(w_i)) = 0 elementwise. The metric is the real
// inner product Re(x^H y) inherited from C^L ~ R^{2L}.

inline bool is_unit_modulus(const CVec& w, double tol = 1e-12) {
  for (int i = 0; i < w.size(); ++i)
    if (std::abs(std::abs(w(i)) - 1.0) > tol) return false;
  return true;
}

inline bool is_tangent_at(const CVec& w, const CVec& xi, double tol = 1e-10) {
  for (int i = 0; i < w.size(); ++i)
    if (std::abs((xi(i) * std::conj(w(i))).real()) > tol) return false;
  return true;
}

/// Orthogonal projection of an ambient vector onto the tangent space at w:
/// v - Re(v .* conj(w)) .* w. Linear and idempotent.
inline CVec project_tangent(const CVec& w, const CVec& v) {
  CVec out(v.size());
  for (int i = 0; i < v.size(); ++i)
    out(i) = v(i) - (v(i) * std::conj(w(i))).real() * w(i);
  return out;
}

struct RetractionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Metric-projection retraction: (w_i + xi_i)/|w_i + xi_i| per element.
/// Throws RetractionError when a step lands on the origin of some circle;
/// callers shrink the step. For exact tangent steps |w_i + xi_i| >= 1.
inline CVec retract(const CVec& w, const CVec& xi) {
  CVec out(w.size());
  for (int i = 0; i < w.size(); ++i) {
    const cplx s = w(i) + xi(i);
    const double m = std::abs(s);
    if (m < 1e-14) throw RetractionError("retract: step cancels circle element " + std::to_string(i));
    out(i) = s / m;
  }
  return out;
}

/// Riemannian gradient from the Euclidean one (Wirtinger convention
/// dQ/dRe + j dQ/dIm): the tangent projection of egrad at w.
inline CVec riemannian_grad(const CVec& w, const CVec& egrad) {
  return project_tangent(w, egrad);
}

enum class DescentMode { gradient, conjugate_gradient };

struct CcmSolverParams {
  double grad_tol = 1e-6;   // stop when the Riemannian gradient norm drops below
  int max_iters = 300;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double step0 = 1.0;
  DescentMode mode = DescentMode::conjugate_gradient;

  void validate() const {
    if (grad_tol <= 0) throw std::invalid_argument("ccm: grad_tol must be > 0");
    if (armijo_c1 <= 0 || armijo_c1 >= 1) throw std::invalid_argument("ccm: armijo_c1 must be in (0,1)");
    if (backtrack <= 0 || backtrack >= 1) throw std::invalid_argument("ccm: backtrack must be in (0,1)");
    if (step0 <= 0) throw std::invalid_argument("ccm: step0 must be > 0");
    if (max_iters < 1) throw std::invalid_argument("ccm: max_iters must be >= 1");
  }
};

enum class SolveStatus {
  converged,          // gradient tolerance reached
  max_iters,          // iteration budget exhausted
  line_search_failed, // no acceptable step above the minimum length
  infeasible,         // outer loop exhausted without a feasible point
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::line_search_failed: return "line_search_failed";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

/// Per-iteration solver record. Inner descent fills objective and grad_norm;
/// penalty outer loops add violation and the (rho, u) state.
struct TraceEntry {
  double objective = 0.0;
  double grad_norm = 0.0;
  double violation = 0.0;
  double rho = 0.0;
  double smoothing_u = 0.0;
};

struct SolverTrace {
  std::vector<TraceEntry> entries;
  SolveStatus status = SolveStatus::max_iters;
};

/// First-order descent on the circle manifold with Armijo backtracking. The
/// callback returns (Q(w), Euclidean grad Q(w)); Q is minimized. Directions
/// are either steepest descent or Polak-Ribiere conjugate gradient with
/// tangent transport and automatic restarts. Accepted iterates are valid
/// phase points and Q is non-increasing across them. Non-finite objective or
/// gradient values abort with a diagnostic.
template <typename Objective>
std::pair<CVec, SolverTrace> ccm_minimize(Objective&& objective, const CVec& w0,
                                          const CcmSolverParams& params = {}) {
  params.validate();
  if (!is_unit_modulus(w0))
    throw std::invalid_argument("ccm_minimize: w0 is not on the circle manifold");

  const auto real_inner = [](const CVec& a, const CVec& b) {
    return a.conjugate().cwiseProduct(b).sum().real();
  };

  CVec w = w0;
  auto [q, egrad] = objective(w);
  if (!std::isfinite(q) || !egrad.allFinite())
    throw std::runtime_error("ccm_minimize: non-finite objective at the starting point");

  SolverTrace trace;
  CVec rgrad = project_tangent(w, egrad);
  double gnorm = rgrad.norm();
  trace.entries.push_back({q, gnorm, 0.0, 0.0, 0.0});

  CVec dir = -rgrad;
  double slope = -gnorm * gnorm;
  double step_seed = params.step0;
  constexpr double kMinStep = 1e-20;

  for (int iter = 0; iter < params.max_iters; ++iter) {
    if (gnorm <= params.grad_tol) {
      trace.status = SolveStatus::converged;
      return {w, trace};
    }

    bool accepted = false;
    double t = step_seed;
    CVec w_try;
    double q_try = 0.0;
    CVec egrad_try;

    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      while (t >= kMinStep) {
        bool valid = true;
        try {
          w_try = retract(w, t * dir);
        } catch (const RetractionError&) {
          valid = false;
        }
        if (valid) {
          auto [qt, gt] = objective(w_try);
          if (!std::isfinite(qt) || !gt.allFinite())
            throw std::runtime_error("ccm_minimize: non-finite objective during line search");
          if (qt <= q + params.armijo_c1 * t * slope) {
            q_try = qt;
            egrad_try = std::move(gt);
            accepted = true;
            break;
          }
        }
        t *= params.backtrack;
      }
      if (!accepted && real_inner(dir, -rgrad) < dir.norm() * gnorm * (1.0 - 1e-12)) {
        // conjugate direction stalled; retry once along steepest descent
        dir = -rgrad;
        slope = -gnorm * gnorm;
        t = step_seed;
      } else {
        break;
      }
    }

    if (!accepted) {
      trace.status = SolveStatus::line_search_failed;
      return {w, trace};
    }

    w = std::move(w_try);
    q = q_try;
    egrad = std::move(egrad_try);
    const CVec rgrad_new = project_tangent(w, egrad);
    const double gnorm_new = rgrad_new.norm();

    if (params.mode == DescentMode::conjugate_gradient && gnorm > 0.0) {
      const CVec g_old_moved = project_tangent(w, rgrad);
      const double beta =
          std::max(0.0, real_inner(rgrad_new, rgrad_new - g_old_moved) / (gnorm * gnorm));
      dir = -rgrad_new + beta * project_tangent(w, dir);
      slope = real_inner(rgrad_new, dir);
      if (!(slope < -1e-14 * gnorm_new * dir.norm())) {  // not a safe descent direction
        dir = -rgrad_new;
        slope = -gnorm_new * gnorm_new;
      }
    } else {
      dir = -rgrad_new;
      slope = -gnorm_new * gnorm_new;
    }

    rgrad = rgrad_new;
    gnorm = gnorm_new;
    trace.entries.push_back({q, gnorm, 0.0, 0.0, 0.0});
    step_seed = std::min(params.step0, 2.0 * t);  // warm-start the next search
  }

  trace.status = (gnorm <= params.grad_tol) ? SolveStatus::converged : SolveStatus::max_iters;
  return {w, trace};
}

}  // namespace irsnoma
