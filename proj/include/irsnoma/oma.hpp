#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "irsnoma/ee.hpp"
#include "irsnoma/scenario.hpp"

namespace irsnoma {

// Optimized IRS-assisted OMA baselines. Each user transmits alone in its time
// fraction with the reflector phases aligned to its own channel, so the
// per-user gain is the interference-free aligned gain c_k. Airtime splitting
// reduces to a separable strictly convex program on the simplex, solved
// exactly by dual bisection.

/// Interference-free aligned gain (sum_i |g_i||h_ki| + |v_k|)^2; equals the
/// ordering key squared.
inline double aligned_gain(const ChannelRealization& ch, int k) {
  const double key = ch.order_key(k);
  return key * key;
}

struct OmaAllocation {
  RVec alpha;  // time fractions, sums to 1
  RVec p;      // per-user powers, watts
  RVec c;      // aligned gains used
  double avg_power = 0.0;  // sum_k alpha_k p_k
  double sum_rate = 0.0;   // sum_k alpha_k log2(1 + p_k c_k / sigma2)
  double ee = 0.0;         // sum_rate / avg_power (0 when avg_power is 0)
};

namespace detail {

inline constexpr double kAlphaFloor = 1e-9;

// Power meeting rate r within airtime alpha: (sigma2/c)(2^{r/alpha} - 1).
inline double oma_power_for(double inv_gain, double r, double alpha) {
  if (r <= 0.0) return 0.0;
  return inv_gain * std::expm1(r * M_LN2 / alpha);
}

// d/dalpha of alpha * oma_power_for(alpha): inv_gain * (e^x (1 - x) - 1) with
// x = r ln2 / alpha. Strictly negative and increasing in alpha.
inline double airtime_cost_slope(double inv_gain, double r, double alpha) {
  const double x = r * M_LN2 / alpha;
  const double g = x > 36.0 ? std::exp(x) * (1.0 - x) - 1.0 : std::expm1(x) - x * std::exp(x);
  return inv_gain * g;
}

// Airtime where the per-user cost slope equals nu, clamped to [lo, hi].
inline double airtime_at_slope(double inv_gain, double r, double nu, double lo, double hi) {
  if (airtime_cost_slope(inv_gain, r, hi) <= nu) return hi;
  if (airtime_cost_slope(inv_gain, r, lo) >= nu) return lo;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (airtime_cost_slope(inv_gain, r, mid) < nu)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Minimizes sum_k inv_gain_k * alpha_k (2^{r_k/alpha_k} - 1) over
// sum alpha = budget, alpha >= kAlphaFloor, by bisecting the shared slope
// multiplier. All rates must be positive.
inline RVec split_time_budget(const RVec& inv_gain, const RVec& r, double budget) {
  const int m = static_cast<int>(r.size());
  RVec alpha(m);
  if (m == 1) {
    alpha(0) = budget;
    return alpha;
  }
  const double lo = kAlphaFloor, hi = budget;

  const auto fill_at = [&](double nu) {
    double total = 0.0;
    for (int k = 0; k < m; ++k) {
      alpha(k) = airtime_at_slope(inv_gain(k), r(k), nu, lo, hi);
      total += alpha(k);
    }
    return total;
  };

  double nu_hi = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < m; ++k) nu_hi = std::max(nu_hi, airtime_cost_slope(inv_gain(k), r(k), hi));
  double nu_lo = nu_hi * 2.0;
  for (int guard = 0; guard < 200 && fill_at(nu_lo) > budget; ++guard) {
    nu_lo *= 4.0;
    if (std::isinf(nu_lo)) {
      nu_lo = -1e300;
      break;
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double nu = 0.5 * (nu_lo + nu_hi);
    const double total = fill_at(nu);
    if (std::abs(total - budget) <= 1e-13 * budget) break;
    (total > budget ? nu_hi : nu_lo) = nu;
  }
  fill_at(0.5 * (nu_lo + nu_hi));
  alpha *= budget / alpha.sum();
  return alpha;
}

template <typename F>
double golden_max(F&& f, double a, double b, int iters = 90) {
  if (b <= a) return a;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if ((b - a) <= 1e-14 * (std::abs(a) + std::abs(b) + 1e-300)) break;
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

inline void validate_oma_inputs(const RVec& c, const RVec& r_min, double sigma2) {
  if (c.size() != r_min.size()) throw std::invalid_argument("oma: dimension mismatch");
  if (sigma2 <= 0) throw std::domain_error("oma: sigma2 must be > 0");
  for (int k = 0; k < c.size(); ++k) {
    if (!(c(k) > 0.0)) throw std::domain_error("oma: aligned gains must be > 0");
    if (r_min(k) < 0) throw std::domain_error("oma: rate targets must be >= 0");
  }
}

inline OmaAllocation finish_allocation(const RVec& alpha, const RVec& p, const RVec& c,
                                       double sigma2) {
  OmaAllocation out;
  out.alpha = alpha;
  out.p = p;
  out.c = c;
  out.avg_power = alpha.dot(p);
  out.sum_rate = 0.0;
  for (int k = 0; k < c.size(); ++k)
    out.sum_rate += alpha(k) * std::log2(1.0 + p(k) * c(k) / sigma2);
  out.ee = out.avg_power > 0.0 ? out.sum_rate / out.avg_power : 0.0;
  return out;
}

}  // namespace detail

/// Average-power-minimal airtime and power split with every rate constraint
/// binding. Users with a zero rate target receive a vanishing fraction and no
/// power; all targets zero degenerates to a uniform split at zero power.
inline OmaAllocation oma_powermin(const RVec& c, const RVec& r_min, double sigma2) {
  detail::validate_oma_inputs(c, r_min, sigma2);
  const int K = static_cast<int>(c.size());

  std::vector<int> active;
  for (int k = 0; k < K; ++k)
    if (r_min(k) > 0.0) active.push_back(k);

  RVec alpha(K), p = RVec::Zero(K);
  if (active.empty()) {
    alpha.setConstant(1.0 / K);
    return detail::finish_allocation(alpha, p, c, sigma2);
  }

  alpha.setConstant(detail::kAlphaFloor);
  const double budget = 1.0 - (K - static_cast<int>(active.size())) * detail::kAlphaFloor;
  RVec inv_gain(active.size()), r(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    inv_gain(static_cast<int>(i)) = sigma2 / c(active[i]);
    r(static_cast<int>(i)) = r_min(active[i]);
  }
  const RVec split = detail::split_time_budget(inv_gain, r, budget);
  for (std::size_t i = 0; i < active.size(); ++i) {
    alpha(active[i]) = split(static_cast<int>(i));
    p(active[i]) = detail::oma_power_for(inv_gain(static_cast<int>(i)), r(static_cast<int>(i)),
                                         split(static_cast<int>(i)));
  }
  return detail::finish_allocation(alpha, p, c, sigma2);
}

/// Equal time fractions with rate-binding powers; the unoptimized reference.
inline OmaAllocation oma_equal_share(const RVec& c, const RVec& r_min, double sigma2) {
  detail::validate_oma_inputs(c, r_min, sigma2);
  const int K = static_cast<int>(c.size());
  RVec alpha = RVec::Constant(K, 1.0 / K);
  RVec p(K);
  for (int k = 0; k < K; ++k)
    p(k) = detail::oma_power_for(sigma2 / c(k), r_min(k), alpha(k));
  return detail::finish_allocation(alpha, p, c, sigma2);
}

/// OMA energy-efficiency maximization: the strongest-gain user absorbs all
/// excess power while the others stay rate-binding; alternates a concave 1-D
/// power search with a Dinkelbach pass over the airtime simplex. Runs from
/// both the power-minimal and the equal split and keeps the better optimum,
/// so the optimized allocation never loses to the equal-share reference.
/// With equal_share set the fractions stay pinned at 1/K.
inline OmaAllocation oma_ee_max(const RVec& c, const RVec& r_min, double sigma2, double p_cap,
                                bool equal_share = false) {
  detail::validate_oma_inputs(c, r_min, sigma2);
  if (p_cap <= 0) throw std::domain_error("oma_ee_max: power cap must be > 0");
  const int K = static_cast<int>(c.size());

  if (r_min.sum() <= 0.0)  // no rate floor anywhere: EE has no attained maximum
    return oma_powermin(c, r_min, sigma2);

  int excess = 0;
  for (int k = 1; k < K; ++k)
    if (c(k) > c(excess)) excess = k;

  std::vector<int> others_active;
  int zero_others = 0;
  for (int k = 0; k < K; ++k) {
    if (k == excess) continue;
    if (r_min(k) > 0.0)
      others_active.push_back(k);
    else
      ++zero_others;
  }

  RVec oth_inv(others_active.size()), oth_r(others_active.size());
  for (std::size_t i = 0; i < others_active.size(); ++i) {
    oth_inv(static_cast<int>(i)) = sigma2 / c(others_active[i]);
    oth_r(static_cast<int>(i)) = r_min(others_active[i]);
  }
  const double rate_others = oth_r.sum();
  const double inv_gain_m = sigma2 / c(excess);

  // Average power spent by the rate-binding users for a given split.
  const auto others_cost = [&](const RVec& split) {
    double cost = 0.0;
    for (int i = 0; i < split.size(); ++i)
      cost += split(i) * detail::oma_power_for(oth_inv(i), oth_r(i), split(i));
    return cost;
  };

  const auto evaluate = [&](double alpha_m, const RVec& split, double p_m) {
    const double rate_m = std::log2(1.0 + p_m * c(excess) / sigma2);
    const double num = alpha_m * rate_m + rate_others;
    const double den = alpha_m * p_m + others_cost(split);
    return std::pair<double, double>{num, den};
  };

  struct Candidate {
    RVec alpha;
    RVec p;
    double ee;
  };
  std::vector<Candidate> winners;

  std::vector<RVec> starts;
  if (!equal_share) starts.push_back(oma_powermin(c, r_min, sigma2).alpha);
  starts.push_back(RVec::Constant(K, 1.0 / K));

  for (const RVec& alpha0 : starts) {
    RVec alpha = alpha0;
    double alpha_m = alpha(excess);
    RVec split(others_active.size());
    for (std::size_t i = 0; i < others_active.size(); ++i)
      split(static_cast<int>(i)) = alpha(others_active[i]);

    double p_m = detail::oma_power_for(inv_gain_m, r_min(excess), alpha_m);
    if (p_m > p_cap * (1.0 + 1e-9))
      throw InfeasibleError("oma_ee_max: excess user infeasible under the power cap");
    double ee = 0.0;
    {
      auto [num, den] = evaluate(alpha_m, split, p_m);
      ee = den > 0 ? num / den : 0.0;
    }

    for (int round = 0; round < 100; ++round) {
      const double ee_before = ee;

      // power step: 1-D pseudo-concave search for the excess user
      const double p_lo = detail::oma_power_for(inv_gain_m, r_min(excess), alpha_m);
      if (p_lo > p_cap * (1.0 + 1e-9))
        throw InfeasibleError("oma_ee_max: excess user infeasible under the power cap");
      p_m = detail::golden_max(
          [&](double pm) {
            auto [num, den] = evaluate(alpha_m, split, pm);
            return den > 0 ? num / den : 0.0;
          },
          p_lo, p_cap);
      p_m = std::clamp(p_m, p_lo, p_cap);

      // airtime step: Dinkelbach over the simplex with p_m fixed
      const bool tune_alpha = !equal_share && K > 1 && !others_active.empty();
      if (tune_alpha) {
        const double rate_m = std::log2(1.0 + p_m * c(excess) / sigma2);
        const double lo_m = r_min(excess) > 0.0
                                ? std::max(detail::kAlphaFloor, r_min(excess) / rate_m)
                                : detail::kAlphaFloor;
        const double hi_m = 1.0 - (zero_others + static_cast<int>(others_active.size())) *
                                      detail::kAlphaFloor;
        if (lo_m < hi_m) {
          double beta = ee;
          for (int dk = 0; dk < 60; ++dk) {
            const double am = detail::golden_max(
                [&](double a_m) {
                  const double budget = 1.0 - a_m - zero_others * detail::kAlphaFloor;
                  const RVec s = detail::split_time_budget(oth_inv, oth_r, budget);
                  return a_m * (rate_m - beta * p_m) - beta * others_cost(s);
                },
                lo_m, hi_m, 60);
            const double budget = 1.0 - am - zero_others * detail::kAlphaFloor;
            const RVec s = detail::split_time_budget(oth_inv, oth_r, budget);
            auto [num, den] = evaluate(am, s, p_m);
            const double F = num - beta * den;
            alpha_m = am;
            split = s;
            beta = num / den;
            if (F <= 1e-11 * std::max(1.0, std::abs(num))) break;
          }
        }
      }

      auto [num, den] = evaluate(alpha_m, split, p_m);
      ee = den > 0 ? num / den : 0.0;
      if (std::abs(ee - ee_before) <= 1e-8 * std::abs(ee_before)) break;
    }

    Candidate cand;
    cand.alpha = RVec::Constant(K, detail::kAlphaFloor);
    cand.p = RVec::Zero(K);
    cand.alpha(excess) = alpha_m;
    cand.p(excess) = p_m;
    for (std::size_t i = 0; i < others_active.size(); ++i) {
      cand.alpha(others_active[i]) = split(static_cast<int>(i));
      cand.p(others_active[i]) =
          detail::oma_power_for(oth_inv(static_cast<int>(i)), oth_r(static_cast<int>(i)),
                                split(static_cast<int>(i)));
    }
    if (equal_share) cand.alpha = alpha0;  // fractions stay pinned
    cand.ee = ee;
    winners.push_back(std::move(cand));
  }

  const Candidate* best = &winners.front();
  for (const auto& cand : winners)
    if (cand.ee > best->ee) best = &cand;
  return detail::finish_allocation(best->alpha, best->p, c, sigma2);
}

}  // namespace irsnoma
