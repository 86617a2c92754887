#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irsnoma/penalty.hpp"
#include "irsnoma/scenario.hpp"
#include "irsnoma/sdr.hpp"

namespace irsnoma {

/// Optimal power allocation for fixed phases: every rate constraint binds at
/// the optimum, so back-substitution from the interference-free last user
/// gives the exact linear-program solution.
/// p_K = (2^R_K - 1) sigma2 / a_K;  p_k = (2^R_k - 1)(sum_{j>k} p_j a_j + sigma2) / a_k.
inline RVec solve_power_lp(const RVec& a, const RVec& r_min, double sigma2) {
  const int K = static_cast<int>(a.size());
  if (r_min.size() != K) throw std::invalid_argument("solve_power_lp: dimension mismatch");
  if (sigma2 <= 0) throw std::domain_error("solve_power_lp: sigma2 must be > 0");
  for (int k = 0; k < K; ++k)
    if (!(a(k) > 0.0)) throw std::domain_error("solve_power_lp: gains must be > 0");

  RVec p = RVec::Zero(K);
  double interference = 0.0;  // sum_{j>k} p_j a_j
  for (int k = K - 1; k >= 0; --k) {
    const double growth = std::exp2(r_min(k)) - 1.0;
    p(k) = growth * (interference + sigma2) / a(k);
    interference += p(k) * a(k);
  }
  return p;
}

enum class Beamformer { manifold, sdr, aligned, random_fixed, frozen };

inline const char* to_string(Beamformer b) {
  switch (b) {
    case Beamformer::manifold: return "manifold";
    case Beamformer::sdr: return "sdr";
    case Beamformer::aligned: return "aligned";
    case Beamformer::random_fixed: return "random";
    case Beamformer::frozen: return "frozen";
  }
  return "unknown";
}

struct AltOptParams {
  double tol = 1e-4;   // relative sum-power / EE change
  int max_iters = 30;
  // The manifold phase subproblem is nonconvex with genuine local maxima, so
  // the manifold beamformers run the whole alternation from this many seeded
  // starting points (the given w0, per-user aligned anchors, phase
  // interpolations between them, then random phases) and keep the best run,
  // followed by a smoothing-exponent continuation polish. The SDR subproblem
  // is convex and deterministic; restarts do not apply to it.
  int manifold_restarts = 10;
  PenaltyParams penalty;
  sdp::Params sdp;
};

struct AltOptResult {
  RVec p;
  CVec w;
  std::vector<double> sum_power_seq;  // after each accepted power step
  RVec rates;
  int iterations = 0;
  std::string beamformer;
  int rejected_w_steps = 0;  // candidate phases that failed the no-worse test

  double sum_power() const { return p.sum(); }
};

namespace detail {

inline std::uint64_t fold_phases(const CVec& w) {
  std::uint64_t key = 0x9e3779b97f4a7c15ULL;
  for (int i = 0; i < w.size(); ++i) {
    key = mix_keys(key, std::bit_cast<std::uint64_t>(w(i).real()));
    key = mix_keys(key, std::bit_cast<std::uint64_t>(w(i).imag()));
  }
  return key;
}

inline CVec interpolate_phases(const CVec& a, const CVec& b, double tau) {
  CVec out(a.size());
  for (int i = 0; i < a.size(); ++i) {
    const double pa = std::arg(a(i));
    double d = std::arg(b(i)) - pa;
    if (d > M_PI) d -= 2.0 * M_PI;
    if (d < -M_PI) d += 2.0 * M_PI;
    out(i) = std::polar(1.0, pa + tau * d);
  }
  return out;
}

// Starting points for the manifold alternation: the caller's w0, each user's
// aligned phases, interpolations between the strongest pair, then seeded
// random phases up to the requested count.
inline std::vector<CVec> manifold_start_points(const ChannelRealization& ch, const CVec& w0,
                                               std::uint64_t seed, int count) {
  std::vector<CVec> starts{w0};
  const int K = ch.users();
  std::vector<CVec> aligned;
  for (int k = 0; k < K; ++k) aligned.push_back(aligned_phases(ch, k));
  for (const CVec& a : aligned)
    if (static_cast<int>(starts.size()) < count) starts.push_back(a);
  if (K >= 2) {
    for (double tau : {0.5, 0.25, 0.75})
      if (static_cast<int>(starts.size()) < count)
        starts.push_back(interpolate_phases(aligned[0], aligned[1], tau));
    for (int i = 0; i + 1 < K && static_cast<int>(starts.size()) < count; ++i)
      for (int j = i + 1; j < K && static_cast<int>(starts.size()) < count; ++j)
        if (i > 0 || j > 1)
          starts.push_back(interpolate_phases(aligned[static_cast<std::size_t>(i)],
                                              aligned[static_cast<std::size_t>(j)], 0.5));
  }
  StreamRng rng(seed, fold_phases(w0), 0x726573746172ULL);
  while (static_cast<int>(starts.size()) < count) {
    CVec w(ch.reflectors());
    for (int i = 0; i < ch.reflectors(); ++i) w(i) = std::polar(1.0, 2.0 * M_PI * rng.uniform());
    starts.push_back(std::move(w));
  }
  return starts;
}

}  // namespace detail

namespace detail {

inline AltOptResult alt_opt_powermin_single(const ChannelRealization& ch,
                                            const ScenarioConfig& cfg, Beamformer bf,
                                            const CVec& w0, const AltOptParams& prm) {
  const RVec r_min = rate_targets_sic(cfg, ch);
  const int K = ch.users();

  const auto gains = [&ch, K](const CVec& w) {
    RVec a(K);
    for (int k = 0; k < K; ++k) a(k) = effective_gain(ch, w, k);
    return a;
  };

  AltOptResult res;
  res.beamformer = to_string(bf);
  res.w = (bf == Beamformer::aligned) ? aligned_phases(ch, 0) : w0;
  res.p = solve_power_lp(gains(res.w), r_min, cfg.sigma2);
  res.sum_power_seq.push_back(res.p.sum());

  const bool is_static =
      bf == Beamformer::aligned || bf == Beamformer::random_fixed || bf == Beamformer::frozen;

  for (int n = 1; !is_static && n <= prm.max_iters; ++n) {
    res.iterations = n;

    std::optional<CVec> w_cand;
    if (bf == Beamformer::sdr) {
      w_cand = sdr_beamform_powermin(ch, res.p, r_min, cfg.sigma2, prm.sdp);
    } else {
      ConstraintSet cs(ch, res.p, r_min, cfg.sigma2);
      PenaltyResult pr =
          exact_penalty_outer(cs, PenaltyObjective::power_min_slack, res.w, prm.penalty);
      if (pr.status != SolveStatus::infeasible) w_cand = pr.w;
    }
    if (!w_cand) {
      ++res.rejected_w_steps;
      break;
    }

    // Keep a candidate only when the re-solved powers do not increase the
    // total: preserves the monotone sum-power contract even when the SDR
    // extraction or an approximate penalty solve degrades feasibility.
    const RVec p_cand = solve_power_lp(gains(*w_cand), r_min, cfg.sigma2);
    const double before = res.p.sum();
    const double after = p_cand.sum();
    if (after > before * (1.0 + 1e-12)) {
      ++res.rejected_w_steps;
      break;
    }

    res.w = *w_cand;
    res.p = p_cand;
    res.sum_power_seq.push_back(after);
    if (std::abs(before - after) <= prm.tol * before) break;
  }

  res.rates = achieved_rates(ch, res.w, res.p, cfg.sigma2);
  return res;
}

}  // namespace detail

/// Alternating sum-power minimization: exact LP power step, then a phase step
/// with the chosen beamformer. Manifold runs restart the alternation from
/// several seeded phase initializations (see AltOptParams) and finish with a
/// smoothing-continuation polish; SDR and the static beamformers run once.
/// The recorded sum-power sequence is non-increasing and every rate target is
/// met with equality at the returned allocation.
inline AltOptResult alt_opt_powermin(const ChannelRealization& ch, const ScenarioConfig& cfg,
                                     Beamformer bf, const CVec& w0, const AltOptParams& prm = {}) {
  if (!is_unit_modulus(w0)) throw std::invalid_argument("alt_opt_powermin: invalid w0");
  if (bf != Beamformer::manifold || prm.manifold_restarts <= 1)
    return detail::alt_opt_powermin_single(ch, cfg, bf, w0, prm);

  const RVec r_min = rate_targets_sic(cfg, ch);
  const auto starts = detail::manifold_start_points(ch, w0, cfg.seed, prm.manifold_restarts);
  AltOptResult best;
  bool have_best = false;
  for (const CVec& start : starts) {
    AltOptResult run = detail::alt_opt_powermin_single(ch, cfg, bf, start, prm);
    if (!have_best || run.p.sum() < best.p.sum()) {
      best = std::move(run);
      have_best = true;
    }
  }

  // continuation toward the exact minimum: retighten the smoothed min
  for (double factor : {8.0, 64.0}) {
    PenaltyParams pp = prm.penalty;
    pp.gamma *= factor;
    ConstraintSet cs(ch, best.p, r_min, cfg.sigma2);
    const PenaltyResult pr = exact_penalty_outer(cs, PenaltyObjective::power_min_slack, best.w, pp);
    if (pr.status == SolveStatus::infeasible) continue;
    RVec a(ch.users());
    for (int k = 0; k < ch.users(); ++k) a(k) = effective_gain(ch, pr.w, k);
    const RVec p_cand = solve_power_lp(a, r_min, cfg.sigma2);
    if (p_cand.sum() < best.p.sum()) {
      best.w = pr.w;
      best.p = p_cand;
      best.sum_power_seq.push_back(p_cand.sum());
    }
  }
  best.rates = achieved_rates(ch, best.w, best.p, cfg.sigma2);
  return best;
}

}  // namespace irsnoma
