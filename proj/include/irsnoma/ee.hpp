#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irsnoma/noma_power.hpp"
#include "irsnoma/penalty.hpp"
#include "irsnoma/scenario.hpp"
#include "irsnoma/sdr.hpp"

namespace irsnoma {

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// NOMA sum rate in single-log form log2(1 + sum_k p_k a_k / sigma2); equals
/// the telescoping sum of the per-user SIC rates.
inline double sum_rate(const RVec& p, const RVec& a, double sigma2) {
  if (p.size() != a.size()) throw std::invalid_argument("sum_rate: dimension mismatch");
  if (sigma2 <= 0) throw std::domain_error("sum_rate: sigma2 must be > 0");
  return std::log2(1.0 + p.dot(a) / sigma2);
}

/// Energy efficiency: sum rate per watt of total transmit power.
inline double ee_value(const RVec& p, const RVec& a, double sigma2) {
  const double total = p.sum();
  if (!(total > 0.0)) throw std::domain_error("ee_value: total power must be > 0");
  return sum_rate(p, a, sigma2) / total;
}

/// Unconstrained stationary power for user k at ratio parameter beta,
/// clamped into [p_min, p_max]: p* = 1/(beta ln2) - (sum_{i!=k} p_i a_i + sigma2)/a_k.
inline double coordinate_update(int k, const RVec& p, const RVec& a, double beta, double sigma2,
                                double p_min, double p_max) {
  double others = sigma2;
  for (int i = 0; i < p.size(); ++i)
    if (i != k) others += p(i) * a(i);
  const double p_star =
      beta > 0.0 ? 1.0 / (beta * M_LN2) - others / a(k) : std::numeric_limits<double>::infinity();
  return std::clamp(p_star, p_min, p_max);
}

namespace detail {

// Feasibility box for user k at the current allocation: the lower edge binds
// its own rate constraint, the upper edge keeps every earlier (stronger)
// user's constraint satisfied and respects the global cap.
struct CoordinateBounds {
  double lo, hi;
};

inline CoordinateBounds coordinate_bounds(int k, const RVec& p, const RVec& a, const RVec& growth,
                                          double sigma2, double p_cap) {
  const int K = static_cast<int>(p.size());
  double interference = sigma2;
  for (int j = k + 1; j < K; ++j) interference += p(j) * a(j);
  double lo = growth(k) * interference / a(k);

  double hi = p_cap;
  for (int j = 0; j < k; ++j) {
    if (growth(j) <= 0.0) continue;  // zero-rate user constrains nobody
    double others = sigma2;
    for (int i = j + 1; i < K; ++i)
      if (i != k) others += p(i) * a(i);
    hi = std::min(hi, (p(j) * a(j) / growth(j) - others) / a(k));
  }
  if (hi < lo) hi = lo;  // numerical guard; a feasible iterate keeps lo <= p_k <= hi
  return {lo, hi};
}

}  // namespace detail

namespace detail {

// Face moves repairing coordinate-sweep stalls on the coupled SIC polytope.
// Two families cover the blocked directions:
//  - cascades: raise one user's power while every binding earlier constraint
//    is held at equality by raising its owner jointly;
//  - swaps: trade power between two users at constant received power
//    a_i p_i + a_j p_j, which cuts total power whenever the gainier user
//    absorbs the transfer.
class ParametricFaceSearch {
 public:
  ParametricFaceSearch(const RVec& a, const RVec& growth, double sigma2, double beta, double p_cap)
      : a_(a), growth_(growth), sigma2_(sigma2), beta_(beta), p_cap_(p_cap),
        K_(static_cast<int>(a.size())) {}

  double constraint(const RVec& q, int m) const {
    double interference = sigma2_;
    for (int i = m + 1; i < K_; ++i) interference += q(i) * a_(i);
    return q(m) * a_(m) - growth_(m) * interference;
  }

  double objective(const RVec& q) const {
    return std::log2(1.0 + q.dot(a_) / sigma2_) - beta_ * q.sum();
  }

  bool improve(RVec& p) const {
    bool improved = false;
    for (int target = 1; target < K_; ++target) {
      improved |= line_ascent(p, cascade_direction(p, target, +1.0));
      improved |= line_ascent(p, cascade_direction(p, target, -1.0));
    }
    for (int i = 0; i < K_; ++i)
      for (int j = 0; j < K_; ++j)
        if (i != j && a_(j) > a_(i)) improved |= line_ascent(p, swap_direction(i, j));
    return improved;
  }

 private:
  RVec cascade_direction(const RVec& p, int target, double sign) const {
    RVec d = RVec::Zero(K_);
    d(target) = sign;
    for (int j = target - 1; j >= 0; --j) {
      double weighted = 0.0;
      for (int i = j + 1; i < K_; ++i) weighted += a_(i) * d(i);
      if (constraint(p, j) <= 1e-11 * std::max(1.0, growth_(j)))
        d(j) = growth_(j) * weighted / a_(j);  // hold C_j at equality
    }
    return d;
  }

  RVec swap_direction(int from, int to) const {
    RVec d = RVec::Zero(K_);
    d(to) = 1.0;
    d(from) = -a_(to) / a_(from);  // keeps a.p constant
    return d;
  }

  // golden-section ascent along p + t d over the feasible segment
  bool line_ascent(RVec& p, const RVec& d) const {
    double t_max = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K_; ++i) {
      if (d(i) > 0.0) t_max = std::min(t_max, (p_cap_ - p(i)) / d(i));
      if (d(i) < 0.0) t_max = std::min(t_max, p(i) / (-d(i)));
    }
    for (int m = 0; m < K_; ++m) {
      double weighted = 0.0;
      for (int i = m + 1; i < K_; ++i) weighted += a_(i) * d(i);
      const double slope = a_(m) * d(m) - growth_(m) * weighted;
      if (slope < 0.0) t_max = std::min(t_max, std::max(0.0, constraint(p, m)) / (-slope));
    }
    if (!(t_max > 1e-15) || !std::isfinite(t_max)) return false;

    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = t_max;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = objective(p + x1 * d), f2 = objective(p + x2 * d);
    for (int it = 0; it < 120 && (hi - lo) > 1e-15 * t_max; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = objective(p + x2 * d);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = objective(p + x1 * d);
      }
    }
    const double t_star = 0.5 * (lo + hi);
    if (t_star > 0.0 && objective(p + t_star * d) > objective(p) + 1e-15) {
      p += t_star * d;
      return true;
    }
    return false;
  }

  const RVec& a_;
  const RVec& growth_;
  double sigma2_, beta_, p_cap_;
  int K_;
};

}  // namespace detail

/// Concave parametric subproblem max sum_rate(p) - beta * sum(p) over the
/// rate-feasible box: cyclic coordinate ascent from the binding allocation
/// with bounds refreshed each visit, plus cascade moves along binding faces
/// once a sweep stalls (coordinate-wise optima need not be global under the
/// coupled SIC constraints). Throws InfeasibleError when the binding point
/// violates the power cap.
inline RVec solve_parametric(const RVec& a, const RVec& r_min, double sigma2, double beta,
                             double p_cap, int max_sweeps = 500) {
  const int K = static_cast<int>(a.size());
  RVec p = solve_power_lp(a, r_min, sigma2);
  for (int k = 0; k < K; ++k)
    if (p(k) > p_cap * (1.0 + 1e-9))
      throw InfeasibleError("solve_parametric: rate targets infeasible under the power cap");

  RVec growth(K);
  for (int k = 0; k < K; ++k) growth(k) = std::exp2(r_min(k)) - 1.0;

  const detail::ParametricFaceSearch faces(a, growth, sigma2, beta, p_cap);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const RVec p_old = p;
    for (int k = 0; k < K; ++k) {
      const auto box = detail::coordinate_bounds(k, p, a, growth, sigma2, p_cap);
      p(k) = coordinate_update(k, p, a, beta, sigma2, box.lo, box.hi);
    }
    if ((p_old - p).norm() < 1e-10) {
      if (!faces.improve(p)) break;
    }
  }
  return p;
}

struct DinkelbachState {
  double beta = 0.0;  // terminal ratio; equals the achieved EE
  double F = 0.0;     // terminal parametric value, <= eps
  int iterations = 0;
  double eps = 0.0;
  std::vector<double> beta_seq;  // ratio after each update; non-decreasing
};

/// Fractional-program outer loop for fixed phases: repeatedly solve the
/// parametric problem, then move beta to the attained rate/power ratio until
/// the parametric value drops below eps. beta is non-decreasing and the
/// terminal beta is the optimal EE.
inline std::pair<RVec, DinkelbachState> dinkelbach(const RVec& a, const RVec& r_min, double sigma2,
                                                   double p_cap, double eps = 1e-8,
                                                   int max_iters = 100) {
  if (eps <= 0) throw std::invalid_argument("dinkelbach: eps must be > 0");
  DinkelbachState st;
  st.eps = eps;
  st.beta = 0.0;
  RVec p;
  for (st.iterations = 1; st.iterations <= max_iters; ++st.iterations) {
    p = solve_parametric(a, r_min, sigma2, st.beta, p_cap);
    const double rate = sum_rate(p, a, sigma2);
    const double total = p.sum();
    if (!(total > 0.0))
      throw InfeasibleError("dinkelbach: zero total power (all rate targets zero)");
    st.F = rate - st.beta * total;
    st.beta = rate / total;
    st.beta_seq.push_back(st.beta);
    if (st.F <= eps) break;
  }
  return {p, st};
}

enum class EeBeamformer { sdr_obj, manifold_obj, manifold_maxmin };

inline const char* to_string(EeBeamformer b) {
  switch (b) {
    case EeBeamformer::sdr_obj: return "sdr";
    case EeBeamformer::manifold_obj: return "manifold";
    case EeBeamformer::manifold_maxmin: return "manifold_maxmin";
  }
  return "unknown";
}

struct EeAltResult {
  RVec p;
  CVec w;
  double ee = 0.0;
  std::vector<double> ee_seq;  // after each accepted power step
  RVec rates;
  int iterations = 0;
  std::string beamformer;
  int rejected_w_steps = 0;
};

namespace detail {

inline EeAltResult alt_opt_ee_single(const ChannelRealization& ch, const ScenarioConfig& cfg,
                                     EeBeamformer bf, const CVec& w0, const AltOptParams& prm) {
  const RVec r_min = rate_targets_sic(cfg, ch);
  const int K = ch.users();

  const auto gains = [&ch, K](const CVec& w) {
    RVec a(K);
    for (int k = 0; k < K; ++k) a(k) = effective_gain(ch, w, k);
    return a;
  };

  EeAltResult res;
  res.beamformer = to_string(bf);
  res.w = w0;
  {
    auto [p, st] = dinkelbach(gains(res.w), r_min, cfg.sigma2, cfg.P_max);
    res.p = p;
    res.ee = st.beta;
  }
  res.ee_seq.push_back(res.ee);

  for (int n = 1; n <= prm.max_iters; ++n) {
    res.iterations = n;

    std::optional<CVec> w_cand;
    if (bf == EeBeamformer::sdr_obj) {
      w_cand = sdr_beamform_ee(ch, res.p, r_min, cfg.sigma2, prm.sdp);
    } else {
      ConstraintSet cs(ch, res.p, r_min, cfg.sigma2);
      const auto family = bf == EeBeamformer::manifold_obj ? PenaltyObjective::ee_gain
                                                           : PenaltyObjective::power_min_slack;
      PenaltyResult pr = exact_penalty_outer(cs, family, res.w, prm.penalty);
      if (pr.status != SolveStatus::infeasible) w_cand = pr.w;
    }
    if (!w_cand) {
      ++res.rejected_w_steps;
      break;
    }

    double ee_cand = 0.0;
    RVec p_cand;
    try {
      auto [p_new, st] = dinkelbach(gains(*w_cand), r_min, cfg.sigma2, cfg.P_max);
      p_cand = p_new;
      ee_cand = st.beta;
    } catch (const InfeasibleError&) {
      ++res.rejected_w_steps;
      break;
    }

    if (ee_cand < res.ee * (1.0 - 1e-12)) {
      ++res.rejected_w_steps;
      break;
    }
    const double before = res.ee;
    res.w = *w_cand;
    res.p = p_cand;
    res.ee = ee_cand;
    res.ee_seq.push_back(res.ee);
    if (std::abs(res.ee - before) <= prm.tol * std::abs(before)) break;
  }

  res.rates = achieved_rates(ch, res.w, res.p, cfg.sigma2);
  return res;
}

}  // namespace detail

/// Alternating EE maximization: Dinkelbach power step, then a phase step by
/// the chosen variant — sdr_obj relaxes the weighted-gain objective,
/// manifold_obj maximizes it on the manifold, manifold_maxmin instead expands
/// the feasible set by maximizing the worst constraint slack (the strongest
/// performer). Candidate phases are kept only when the re-solved EE does not
/// drop, so the EE trace is non-decreasing. Manifold variants restart the
/// alternation like alt_opt_powermin does; the maxmin variant also gets the
/// smoothing-continuation polish.
inline EeAltResult alt_opt_ee(const ChannelRealization& ch, const ScenarioConfig& cfg,
                              EeBeamformer bf, const CVec& w0, const AltOptParams& prm = {}) {
  if (!is_unit_modulus(w0)) throw std::invalid_argument("alt_opt_ee: invalid w0");
  if (bf == EeBeamformer::sdr_obj || prm.manifold_restarts <= 1)
    return detail::alt_opt_ee_single(ch, cfg, bf, w0, prm);

  const RVec r_min = rate_targets_sic(cfg, ch);
  const auto starts = detail::manifold_start_points(ch, w0, cfg.seed, prm.manifold_restarts);
  EeAltResult best;
  bool have_best = false;
  for (const CVec& start : starts) {
    try {
      EeAltResult run = detail::alt_opt_ee_single(ch, cfg, bf, start, prm);
      if (!have_best || run.ee > best.ee) {
        best = std::move(run);
        have_best = true;
      }
    } catch (const InfeasibleError&) {
      continue;  // this start cannot meet the rate targets under the cap
    }
  }
  if (!have_best)
    throw InfeasibleError("alt_opt_ee: rate targets infeasible under the power cap");

  if (bf == EeBeamformer::manifold_maxmin) {
    for (double factor : {8.0, 64.0}) {
      PenaltyParams pp = prm.penalty;
      pp.gamma *= factor;
      ConstraintSet cs(ch, best.p, r_min, cfg.sigma2);
      const PenaltyResult pr =
          exact_penalty_outer(cs, PenaltyObjective::power_min_slack, best.w, pp);
      if (pr.status == SolveStatus::infeasible) continue;
      RVec a(ch.users());
      for (int k = 0; k < ch.users(); ++k) a(k) = effective_gain(ch, pr.w, k);
      try {
        auto [p_new, st] = dinkelbach(a, r_min, cfg.sigma2, cfg.P_max);
        if (st.beta > best.ee) {
          best.w = pr.w;
          best.p = p_new;
          best.ee = st.beta;
          best.ee_seq.push_back(st.beta);
        }
      } catch (const InfeasibleError&) {
        continue;
      }
    }
    best.rates = achieved_rates(ch, best.w, best.p, cfg.sigma2);
  }
  return best;
}

}  // namespace irsnoma
