#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "irsnoma/ccm.hpp"
#include "irsnoma/scenario.hpp"

namespace irsnoma {

// Exact penalty method with smoothing for the rate-constrained phase-shift
// subproblems. Constraints are evaluated in noise-normalized units (noise
// power 1) so penalty weights, smoothing accuracies and tolerances are
// scale-free regardless of the physical noise floor.

/// Smoothed minimum (sum_k c_k^-gamma)^(-1/gamma), evaluated in the log
/// domain. Tends to min_k c_k from below as gamma grows; requires c > 0.
inline double smooth_min(const RVec& c, double gamma) {
  if (c.size() == 0) throw std::domain_error("smooth_min: empty input");
  if (gamma <= 0) throw std::domain_error("smooth_min: gamma must be > 0");
  double max_term = -std::numeric_limits<double>::infinity();
  RVec neg_gamma_log(c.size());
  for (int k = 0; k < c.size(); ++k) {
    if (!(c(k) > 0.0)) throw std::domain_error("smooth_min: inputs must be positive");
    neg_gamma_log(k) = -gamma * std::log(c(k));
    max_term = std::max(max_term, neg_gamma_log(k));
  }
  double acc = 0.0;
  for (int k = 0; k < c.size(); ++k) acc += std::exp(neg_gamma_log(k) - max_term);
  return std::exp(-(max_term + std::log(acc)) / gamma);
}

/// Linear-quadratic smoothing of max{0, x} with accuracy u: exact outside
/// [0, u], quadratic inside, C1 at both knots. |value - max(0,x)| <= u/2.
inline double smooth_max(double x, double u) {
  if (u <= 0) throw std::domain_error("smooth_max: u must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= u) return x - 0.5 * u;
  return x * x / (2.0 * u);
}

inline double smooth_max_deriv(double x, double u) {
  if (u <= 0) throw std::domain_error("smooth_max_deriv: u must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= u) return 1.0;
  return x / u;
}

/// Everything needed to evaluate the SIC rate constraints C_k(w) and their
/// gradients for a fixed power allocation. Channels are stored scaled by
/// 1/sqrt(sigma2); constraint values come out dimensionless.
class ConstraintSet {
 public:
  ConstraintSet(const ChannelRealization& ch, const RVec& p, const RVec& r_min, double sigma2)
      : p_(p), growth_(r_min.size()) {
    const int K = ch.users();
    if (p.size() != K || r_min.size() != K)
      throw std::invalid_argument("ConstraintSet: p and r_min must have K entries");
    if (sigma2 <= 0) throw std::invalid_argument("ConstraintSet: sigma2 must be > 0");
    const double inv_sn = 1.0 / std::sqrt(sigma2);
    dhat_.reserve(static_cast<std::size_t>(K));
    vhat_.resize(K);
    for (int k = 0; k < K; ++k) {
      dhat_.push_back(ch.cascade(k) * inv_sn);
      vhat_(k) = ch.v(k) * inv_sn;
    }
    init_growth(r_min);
  }

  // Direct construction from pre-normalized cascades; used by tests and by
  // synthetic instances.
  ConstraintSet(std::vector<CVec> dhat, CVec vhat, RVec p, const RVec& r_min)
      : dhat_(std::move(dhat)), vhat_(std::move(vhat)), p_(std::move(p)), growth_(r_min.size()) {
    init_growth(r_min);
  }

  int users() const { return static_cast<int>(vhat_.size()); }
  int reflectors() const { return dhat_.empty() ? 0 : static_cast<int>(dhat_[0].size()); }
  const RVec& powers() const { return p_; }
  const RVec& rate_growth() const { return growth_; }
  const CVec& cascade_scaled(int k) const { return dhat_[static_cast<std::size_t>(k)]; }

  // Effective amplitude dhat_k^T w + vhat_k; its squared modulus is the
  // noise-normalized channel gain.
  cplx amplitude(int k, const CVec& w) const {
    return dhat_[static_cast<std::size_t>(k)].cwiseProduct(w).sum() + vhat_(k);
  }

  double gain(int k, const CVec& w) const { return std::norm(amplitude(k, w)); }

  RVec gains(const CVec& w) const {
    RVec a(users());
    for (int k = 0; k < users(); ++k) a(k) = gain(k, w);
    return a;
  }

  /// C_k = p_k a_k - (2^R_k - 1)(sum_{j>k} p_j a_j + 1), noise-normalized.
  double constraint_value(const CVec& w, int k) const {
    const RVec a = gains(w);
    return constraint_from_gains(a, k);
  }

  RVec constraint_values(const CVec& w) const {
    const RVec a = gains(w);
    RVec c(users());
    for (int k = 0; k < users(); ++k) c(k) = constraint_from_gains(a, k);
    return c;
  }

  /// Wirtinger gradient of C_k: 2 p_k e_k conj(d_k) minus the weighted
  /// interferer terms 2 p_l e_l conj(d_l), l > k.
  CVec constraint_grad(const CVec& w, int k) const {
    std::vector<cplx> e(static_cast<std::size_t>(users()));
    for (int j = 0; j < users(); ++j) e[static_cast<std::size_t>(j)] = amplitude(j, w);
    return constraint_grad_from(e, k);
  }

  double max_violation(const CVec& w) const {
    const RVec c = constraint_values(w);
    double v = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < users(); ++k) v = std::max(v, -c(k));
    return v;
  }

  double constraint_from_gains(const RVec& a, int k) const {
    double interference = 0.0;
    for (int j = k + 1; j < users(); ++j) interference += p_(j) * a(j);
    return p_(k) * a(k) - growth_(k) * (interference + 1.0);
  }

  CVec constraint_grad_from(const std::vector<cplx>& amplitudes, int k) const {
    CVec grad = 2.0 * p_(k) * amplitudes[static_cast<std::size_t>(k)] *
                dhat_[static_cast<std::size_t>(k)].conjugate();
    for (int l = k + 1; l < users(); ++l)
      grad -= 2.0 * growth_(k) * p_(l) * amplitudes[static_cast<std::size_t>(l)] *
              dhat_[static_cast<std::size_t>(l)].conjugate();
    return grad;
  }

 private:
  void init_growth(const RVec& r_min) {
    for (int k = 0; k < r_min.size(); ++k) {
      if (!(p_(k) >= 0) || !std::isfinite(p_(k)))
        throw std::invalid_argument("ConstraintSet: powers must be finite and >= 0");
      if (!std::isfinite(r_min(k)) || r_min(k) < 0)
        throw std::invalid_argument("ConstraintSet: rate targets must be finite and >= 0");
      growth_(k) = std::exp2(r_min(k)) - 1.0;
    }
  }

  std::vector<CVec> dhat_;
  CVec vhat_;
  RVec p_;
  RVec growth_;  // 2^R_min - 1
};

struct PenaltyParams {
  double rho0 = 1.0;      // starting penalty weight
  double theta_rho = 10.0;
  double u0 = 1e-2;       // starting smoothing accuracy
  double u_min = 1e-8;
  double theta_u = 0.5;
  double tau = 1e-9;      // feasibility tolerance on max_k(-C_k)
  double d_min = 1e-6;    // minimum step length between outer iterates
  double gamma = 64.0;    // smooth-min exponent
  int max_outer = 30;
  CcmSolverParams inner;

  void validate() const {
    if (rho0 <= 0 || theta_rho <= 1) throw std::invalid_argument("penalty: need rho0 > 0, theta_rho > 1");
    if (u0 <= 0 || u_min <= 0 || u_min > u0) throw std::invalid_argument("penalty: need 0 < u_min <= u0");
    if (theta_u <= 0 || theta_u >= 1) throw std::invalid_argument("penalty: theta_u must be in (0,1)");
    if (tau < 0) throw std::invalid_argument("penalty: tau must be >= 0");
    if (d_min <= 0) throw std::invalid_argument("penalty: d_min must be > 0");
    if (gamma <= 0) throw std::invalid_argument("penalty: gamma must be > 0");
    if (max_outer < 1) throw std::invalid_argument("penalty: max_outer must be >= 1");
    inner.validate();
  }
};

struct ObjectiveEval {
  double value = 0.0;  // maximized form
  CVec egrad;
};

namespace detail {

// Smoothing floor applied to constraint values before the smoothed min, so
// the objective stays defined and keeps a strictly positive slope when
// constraints touch or cross zero. floor(c) = uf * log(1 + exp(c/uf));
// indistinguishable from c once c >= ~40*uf.
inline constexpr double kConstraintFloorWidth = 1e-6;

inline double log_softplus(double t) {
  if (t > 36.0) return std::log(t + std::exp(-t));
  if (t < -36.0) return t;  // log(log1p(exp(t))) -> t
  return std::log(std::log1p(std::exp(t)));
}

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Value and per-constraint weights of smooth_min(floor(C)). The returned
// weights are d smooth_min / d C_k, everything computed in logs.
inline std::pair<double, RVec> floored_smooth_min(const RVec& c, double gamma) {
  const double uf = kConstraintFloorWidth;
  const int K = static_cast<int>(c.size());
  RVec ell(K);
  double ell_min = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    ell(k) = std::log(uf) + log_softplus(c(k) / uf);
    ell_min = std::min(ell_min, ell(k));
  }
  // log-sum-exp of -gamma*ell
  double acc = 0.0;
  for (int k = 0; k < K; ++k) acc += std::exp(-gamma * (ell(k) - ell_min));
  const double log_f = ell_min - std::log(acc) / gamma;
  RVec weights(K);
  for (int k = 0; k < K; ++k) {
    const double log_w = (gamma + 1.0) * (log_f - ell(k));
    weights(k) = std::exp(log_w) * logistic(c(k) / uf);
  }
  return {std::exp(log_f), weights};
}

}  // namespace detail

/// Penalized max-min-slack objective for the power-minimization phase step:
/// Q(w) = smooth_min(floor(C(w))) - rho * sum_k P(-C_k(w), u), to be
/// maximized (callers hand -Q to the minimizing solver). Returns Q and its
/// Euclidean Wirtinger gradient.
inline ObjectiveEval penalized_objective_powermin(const ConstraintSet& cs, const CVec& w,
                                                  double rho, double u, double gamma) {
  const int K = cs.users();
  std::vector<cplx> e(static_cast<std::size_t>(K));
  RVec c(K);
  {
    RVec a(K);
    for (int k = 0; k < K; ++k) {
      e[static_cast<std::size_t>(k)] = cs.amplitude(k, w);
      a(k) = std::norm(e[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < K; ++k) c(k) = cs.constraint_from_gains(a, k);
  }

  auto [base, weights] = detail::floored_smooth_min(c, gamma);

  ObjectiveEval out;
  out.value = base;
  out.egrad = CVec::Zero(w.size());
  for (int k = 0; k < K; ++k) {
    const double pen_slope = smooth_max_deriv(-c(k), u);
    const double coeff = weights(k) + rho * pen_slope;
    if (coeff != 0.0) out.egrad += coeff * cs.constraint_grad_from(e, k);
    out.value -= rho * smooth_max(-c(k), u);
  }
  if (!std::isfinite(out.value) || !out.egrad.allFinite())
    throw std::runtime_error("penalized_objective_powermin: non-finite evaluation");
  return out;
}

/// Penalized weighted-gain objective for the EE phase step:
/// Q(w) = sum_k p_k a_k(w) - rho * sum_k P(-C_k(w), u), maximized.
inline ObjectiveEval penalized_objective_ee(const ConstraintSet& cs, const CVec& w,
                                            double rho, double u) {
  const int K = cs.users();
  std::vector<cplx> e(static_cast<std::size_t>(K));
  RVec a(K), c(K);
  for (int k = 0; k < K; ++k) {
    e[static_cast<std::size_t>(k)] = cs.amplitude(k, w);
    a(k) = std::norm(e[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < K; ++k) c(k) = cs.constraint_from_gains(a, k);

  ObjectiveEval out;
  out.value = 0.0;
  out.egrad = CVec::Zero(w.size());
  const RVec& p = cs.powers();
  for (int k = 0; k < K; ++k) {
    out.value += p(k) * a(k);
    out.egrad += 2.0 * p(k) * e[static_cast<std::size_t>(k)] * cs.cascade_scaled(k).conjugate();
    const double pen_slope = smooth_max_deriv(-c(k), u);
    if (pen_slope != 0.0) out.egrad += rho * pen_slope * cs.constraint_grad_from(e, k);
    out.value -= rho * smooth_max(-c(k), u);
  }
  if (!std::isfinite(out.value) || !out.egrad.allFinite())
    throw std::runtime_error("penalized_objective_ee: non-finite evaluation");
  return out;
}

enum class PenaltyObjective { power_min_slack, ee_gain };

struct PenaltyResult {
  CVec w;
  SolverTrace trace;
  SolveStatus status = SolveStatus::max_iters;
  double final_violation = 0.0;
};

/// Outer loop driving the smoothed exact penalty: repeatedly minimize
/// -Q(., rho_l, u_l) on the manifold, warm-started, tightening u and raising
/// rho while the worst constraint violation exceeds tau. Returns the first
/// iterate passing the step-size/accuracy and feasibility tests, otherwise
/// the best feasible iterate seen (status max_iters) or status infeasible.
inline PenaltyResult exact_penalty_outer(const ConstraintSet& cs, PenaltyObjective family,
                                         const CVec& w0, const PenaltyParams& pp = {}) {
  pp.validate();
  if (!is_unit_modulus(w0))
    throw std::invalid_argument("exact_penalty_outer: w0 is not on the circle manifold");

  const auto evaluate = [&cs, &pp, family](const CVec& w, double rho, double u) {
    return family == PenaltyObjective::power_min_slack
               ? penalized_objective_powermin(cs, w, rho, u, pp.gamma)
               : penalized_objective_ee(cs, w, rho, u);
  };
  // Feasibility-aside merit used to pick the best iterate: the unpenalized
  // part of the maximized objective.
  const auto base_value = [&cs, &pp, family](const CVec& w) {
    return family == PenaltyObjective::power_min_slack
               ? detail::floored_smooth_min(cs.constraint_values(w), pp.gamma).first
               : cs.powers().dot(cs.gains(w));
  };

  double rho = pp.rho0;
  double u = pp.u0;
  CVec w = w0;
  PenaltyResult result;
  result.w = w0;

  std::optional<std::pair<double, CVec>> best_feasible;

  for (int l = 0; l < pp.max_outer; ++l) {
    auto inner_objective = [&](const CVec& x) {
      ObjectiveEval ev = evaluate(x, rho, u);
      return std::make_pair(-ev.value, CVec(-ev.egrad));
    };
    auto [w_next, inner_trace] = ccm_minimize(inner_objective, w, pp.inner);

    const double viol = cs.max_violation(w_next);
    const double q_next = -inner_trace.entries.back().objective;
    result.trace.entries.push_back({q_next, inner_trace.entries.back().grad_norm, viol, rho, u});

    if (viol < pp.tau) {
      const double merit = base_value(w_next);
      if (!best_feasible || merit > best_feasible->first) best_feasible = {merit, w_next};
    }

    const double dist = (w_next - w).norm();
    if ((dist < pp.d_min || u <= pp.u_min) && viol < pp.tau) {
      result.w = w_next;
      result.status = SolveStatus::converged;
      result.final_violation = viol;
      return result;
    }

    u = std::max(pp.u_min, pp.theta_u * u);
    if (l == 0 || viol >= pp.tau) rho *= pp.theta_rho;
    w = w_next;
  }

  if (best_feasible) {
    result.w = best_feasible->second;
    result.status = SolveStatus::max_iters;
    result.final_violation = cs.max_violation(result.w);
  } else {
    result.w = w;
    result.status = SolveStatus::infeasible;
    result.final_violation = cs.max_violation(w);
  }
  return result;
}

}  // namespace irsnoma
