#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace irsnoma {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

}  // namespace detail

// Deterministic random stream keyed by (seed, stream, salt). Gaussians come
// from Box-Muller on the raw 64-bit engine output, so realizations are
// reproducible across platforms and independent of draw bookkeeping elsewhere.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt)
      : engine_(detail::mix_keys(detail::mix_keys(seed, stream), salt)) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Circularly-symmetric complex normal with unit variance.
  cplx cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return cplx(re * M_SQRT1_2, im * M_SQRT1_2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream salts; one per consumer so streams never overlap.
inline constexpr std::uint64_t kSaltChannels = 0x6368616e6e656cULL;
inline constexpr std::uint64_t kSaltLosAngles = 0x6c6f73616e67ULL;
inline constexpr std::uint64_t kSaltInitPhases = 0x77302d696e6974ULL;

/// All physical and algorithmic scenario parameters. Powers are watts
/// internally; helpers convert dB/dBm at the boundary.
struct ScenarioConfig {
  int K = 2;  // users
  int L = 16; // reflecting elements

  double d_IB = 75.0;                     // IRS-BS distance, meters
  std::vector<double> d_UI{10.0, 20.0};   // user-IRS distances
  std::vector<double> d_UB{30.0, 50.0};   // user-BS distances

  double alpha_BU = 5.5;  // direct-link path loss exponent
  double alpha_IU = 2.2;  // user-IRS exponent
  double alpha_BI = 2.2;  // IRS-BS exponent
  double eta0 = 1e-3;     // path loss at 1 m, linear

  double K_IB = 2.2;  // Rician factor, IRS-BS (linear)
  double K_UI = 2.2;  // Rician factor, user-IRS (linear)

  double sigma2 = 3.9810717055349725e-15;  // noise power, watts (-114 dBm)

  std::vector<double> R_min{0.2, 0.2};  // per-user rate targets, bits/s/Hz
  double P_max = 1.0;                   // per-user transmit power cap, watts

  std::uint64_t seed = 1;

  // Deterministic LoS departure/arrival angles (radians). When empty they are
  // derived from the seed, once per link, and stay fixed across trials.
  std::vector<double> los_angle_g;  // empty or a single value
  std::vector<double> los_angles_h; // empty or K values

  void validate() const {
    if (K < 1) throw std::invalid_argument("scenario: K must be >= 1");
    if (L < 1) throw std::invalid_argument("scenario: L must be >= 1");
    if (d_IB <= 0) throw std::invalid_argument("scenario: d_IB must be > 0");
    if (static_cast<int>(d_UI.size()) != K || static_cast<int>(d_UB.size()) != K)
      throw std::invalid_argument("scenario: distance lists must have K entries");
    for (double d : d_UI)
      if (d <= 0) throw std::invalid_argument("scenario: d_UI entries must be > 0");
    for (double d : d_UB)
      if (d <= 0) throw std::invalid_argument("scenario: d_UB entries must be > 0");
    if (eta0 <= 0) throw std::invalid_argument("scenario: eta0 must be > 0");
    if (sigma2 <= 0) throw std::invalid_argument("scenario: sigma2 must be > 0");
    if (K_IB < 0 || K_UI < 0) throw std::invalid_argument("scenario: Rician factors must be >= 0");
    if (static_cast<int>(R_min.size()) != K)
      throw std::invalid_argument("scenario: R_min must have K entries");
    for (double r : R_min)
      if (r < 0 || !std::isfinite(r)) throw std::invalid_argument("scenario: R_min entries must be >= 0");
    if (P_max <= 0) throw std::invalid_argument("scenario: P_max must be > 0");
    if (!los_angle_g.empty() && los_angle_g.size() != 1)
      throw std::invalid_argument("scenario: los_angle_g takes a single value");
    if (!los_angles_h.empty() && static_cast<int>(los_angles_h.size()) != K)
      throw std::invalid_argument("scenario: los_angles_h must have K entries");
  }

  // Reference deployments: K=2 uses {10,20}/{30,50} m, K=3 adds a far user at
  // {40}/{200} m. Other K require explicit distances.
  static ScenarioConfig defaults_for_users(int users) {
    ScenarioConfig cfg;
    cfg.K = users;
    switch (users) {
      case 1:
        cfg.d_UI = {10.0};
        cfg.d_UB = {30.0};
        cfg.R_min = {0.2};
        break;
      case 2:
        cfg.d_UI = {10.0, 20.0};
        cfg.d_UB = {30.0, 50.0};
        cfg.R_min = {0.2, 0.2};
        break;
      case 3:
        cfg.d_UI = {10.0, 20.0, 40.0};
        cfg.d_UB = {30.0, 50.0, 200.0};
        cfg.R_min = {0.2, 0.2, 0.2};
        break;
      default:
        throw std::invalid_argument("scenario: no default distances for K > 3");
    }
    return cfg;
  }
};

/// Distance-power law eta0 * (d / 1m)^-alpha.
inline double path_loss(double d, double alpha, double eta0) {
  if (d <= 0.0) throw std::domain_error("path_loss: distance must be > 0");
  if (eta0 <= 0.0) throw std::domain_error("path_loss: eta0 must be > 0");
  return eta0 * std::pow(d, -alpha);
}

/// One channel draw with users already sorted into SIC order.
struct ChannelRealization {
  CVec g;                  // IRS-BS, length L
  std::vector<CVec> h;     // user-IRS per user, SIC order
  CVec v;                  // direct user-BS, SIC order
  RVec order_key;          // sum_i |g_i||h_ki| + |v_k|, descending
  std::vector<int> perm;   // SIC slot -> raw user index

  int users() const { return static_cast<int>(v.size()); }
  int reflectors() const { return static_cast<int>(g.size()); }

  // Cascaded IRS channel g .* h_k for user k (SIC order).
  CVec cascade(int k) const { return g.cwiseProduct(h[static_cast<std::size_t>(k)]); }
};

/// Permutation sorting keys descending; ties keep the original order.
inline std::vector<int> order_users(const std::vector<double>& keys) {
  std::vector<int> perm(keys.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::stable_sort(perm.begin(), perm.end(),
                   [&keys](int a, int b) { return keys[static_cast<std::size_t>(a)] > keys[static_cast<std::size_t>(b)]; });
  return perm;
}

namespace detail {

// Uniform-linear-array response with element phase pi*(i-1)*sin(angle).
inline CVec steering_vector(int n, double angle) {
  CVec a(n);
  const double step = M_PI * std::sin(angle);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, step * i);
  return a;
}

inline double draw_angle(StreamRng& rng) { return M_PI * (rng.uniform() - 0.5); }

}  // namespace detail

/// Draws (g, {h_k}, {v_k}) for one trial. Rician on the IRS-side links with a
/// deterministic steering-vector LoS component, Rayleigh on the direct links.
/// Pure function of (cfg, trial_index).
inline ChannelRealization sample_channels(const ScenarioConfig& cfg, int trial_index) {
  cfg.validate();
  const int L = cfg.L;
  const int K = cfg.K;

  // LoS geometry is fixed per link across all trials.
  double angle_g;
  std::vector<double> angles_h(static_cast<std::size_t>(K));
  {
    StreamRng los(cfg.seed, 0, kSaltLosAngles);
    angle_g = cfg.los_angle_g.empty() ? detail::draw_angle(los) : cfg.los_angle_g[0];
    for (int k = 0; k < K; ++k) {
      const double drawn = detail::draw_angle(los);
      angles_h[static_cast<std::size_t>(k)] = cfg.los_angles_h.empty() ? drawn : cfg.los_angles_h[static_cast<std::size_t>(k)];
    }
  }

  StreamRng rng(cfg.seed, static_cast<std::uint64_t>(trial_index), kSaltChannels);

  const auto rician = [&rng, L](double pl, double kf, double angle) {
    const double los_scale = std::sqrt(pl * kf / (kf + 1.0));
    const double nlos_scale = std::sqrt(pl / (kf + 1.0));
    CVec out = los_scale * detail::steering_vector(L, angle);
    for (int i = 0; i < L; ++i) out(i) += nlos_scale * rng.cgaussian();
    return out;
  };

  ChannelRealization ch;
  ch.g = rician(path_loss(cfg.d_IB, cfg.alpha_BI, cfg.eta0), cfg.K_IB, angle_g);

  std::vector<CVec> h_raw(static_cast<std::size_t>(K));
  CVec v_raw(K);
  for (int k = 0; k < K; ++k) {
    h_raw[static_cast<std::size_t>(k)] =
        rician(path_loss(cfg.d_UI[static_cast<std::size_t>(k)], cfg.alpha_IU, cfg.eta0), cfg.K_UI,
               angles_h[static_cast<std::size_t>(k)]);
    v_raw(k) = std::sqrt(path_loss(cfg.d_UB[static_cast<std::size_t>(k)], cfg.alpha_BU, cfg.eta0)) * rng.cgaussian();
  }

  std::vector<double> keys(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    double s = std::abs(v_raw(k));
    for (int i = 0; i < L; ++i) s += std::abs(ch.g(i)) * std::abs(h_raw[static_cast<std::size_t>(k)](i));
    keys[static_cast<std::size_t>(k)] = s;
  }

  ch.perm = order_users(keys);
  ch.h.resize(static_cast<std::size_t>(K));
  ch.v.resize(K);
  ch.order_key.resize(K);
  for (int slot = 0; slot < K; ++slot) {
    const int raw = ch.perm[static_cast<std::size_t>(slot)];
    ch.h[static_cast<std::size_t>(slot)] = h_raw[static_cast<std::size_t>(raw)];
    ch.v(slot) = v_raw(raw);
    ch.order_key(slot) = keys[static_cast<std::size_t>(raw)];
  }
  return ch;
}

/// Rate targets rearranged into the realization's SIC order.
inline RVec rate_targets_sic(const ScenarioConfig& cfg, const ChannelRealization& ch) {
  RVec r(ch.users());
  for (int slot = 0; slot < ch.users(); ++slot)
    r(slot) = cfg.R_min[static_cast<std::size_t>(ch.perm[static_cast<std::size_t>(slot)])];
  return r;
}

/// Squared effective channel |sum_i g_i w_i h_ki + v_k|^2, linear power gain.
inline double effective_gain(const ChannelRealization& ch, const CVec& w, int k) {
  cplx e = ch.v(k);
  const CVec& hk = ch.h[static_cast<std::size_t>(k)];
  for (int i = 0; i < ch.reflectors(); ++i) e += ch.g(i) * w(i) * hk(i);
  return std::norm(e);
}

/// Phases aligning every cascaded element with user k's direct link; attains
/// the maximum achievable gain order_key[k]^2 for that user.
inline CVec aligned_phases(const ChannelRealization& ch, int k) {
  const CVec d = ch.cascade(k);
  const double theta_v = std::arg(ch.v(k));
  CVec w(d.size());
  for (int i = 0; i < d.size(); ++i)
    w(i) = std::abs(d(i)) > 0.0 ? std::polar(1.0, theta_v - std::arg(d(i))) : cplx(1.0, 0.0);
  return w;
}

/// Independent uniform phases for solver initialization; trial-reproducible.
inline CVec random_phases(const ScenarioConfig& cfg, int trial_index) {
  StreamRng rng(cfg.seed, static_cast<std::uint64_t>(trial_index), kSaltInitPhases);
  CVec w(cfg.L);
  for (int i = 0; i < cfg.L; ++i) w(i) = std::polar(1.0, 2.0 * M_PI * rng.uniform());
  return w;
}

/// Per-user achievable rates under SIC at the given powers and phases.
inline RVec achieved_rates(const ChannelRealization& ch, const CVec& w, const RVec& p, double sigma2) {
  const int K = ch.users();
  RVec a(K);
  for (int k = 0; k < K; ++k) a(k) = effective_gain(ch, w, k);
  RVec rates(K);
  for (int k = 0; k < K; ++k) {
    double interference = 0.0;
    for (int j = k + 1; j < K; ++j) interference += p(j) * a(j);
    rates(k) = std::log2(1.0 + p(k) * a(k) / (interference + sigma2));
  }
  return rates;
}

}  // namespace irsnoma
