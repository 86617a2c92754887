#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "irsnoma/ee.hpp"
#include "irsnoma/noma_power.hpp"
#include "irsnoma/oma.hpp"
#include "irsnoma/scenario.hpp"

namespace irsnoma {

// Experiment orchestration: Monte-Carlo sweeps over reflector counts and
// trials for a set of solver stacks, with deterministic per-trial channels
// and byte-stable CSV output plus a JSON sidecar carrying the resolved spec.

struct MethodSpec {
  std::string problem;     // powermin | eemax
  std::string access;      // noma | oma | oma_equal
  std::string beamformer;  // manifold | sdr | manifold_maxmin | aligned | random

  std::string id() const { return problem + "/" + access + "/" + beamformer; }
};

inline MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  std::istringstream in(text);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '/')) parts.push_back(part);
  if (parts.size() == 2) parts.push_back("aligned");  // OMA methods may omit the beamformer
  if (parts.size() != 3) throw std::invalid_argument("method must be problem/access[/beamformer]: " + text);
  m.problem = parts[0];
  m.access = parts[1];
  m.beamformer = parts[2];
  if (m.problem != "powermin" && m.problem != "eemax")
    throw std::invalid_argument("unknown problem: " + m.problem);
  if (m.access != "noma" && m.access != "oma" && m.access != "oma_equal")
    throw std::invalid_argument("unknown access: " + m.access);
  if (m.access == "noma") {
    const bool ok = m.beamformer == "manifold" || m.beamformer == "sdr" ||
                    m.beamformer == "manifold_maxmin" || m.beamformer == "aligned" ||
                    m.beamformer == "random";
    if (!ok) throw std::invalid_argument("unknown beamformer: " + m.beamformer);
    if (m.problem == "eemax" && (m.beamformer == "aligned" || m.beamformer == "random"))
      throw std::invalid_argument("eemax/noma supports manifold, manifold_maxmin and sdr");
  } else {
    m.beamformer = "aligned";  // per-user aligned phases by construction
  }
  return m;
}

struct ExperimentSpec {
  ScenarioConfig cfg;
  std::vector<int> L_sweep{8, 16, 24, 32};
  int trials = 50;
  std::vector<MethodSpec> methods;
  std::string out = "results";
  bool timing = false;

  void validate() const {
    cfg.validate();
    if (trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
    if (L_sweep.empty()) throw std::invalid_argument("experiment: L_sweep must be non-empty");
    for (int l : L_sweep)
      if (l < 1) throw std::invalid_argument("experiment: reflector counts must be >= 1");
    if (methods.empty()) throw std::invalid_argument("experiment: no methods selected");
  }
};

struct ResultRow {
  int L = 0;
  int trial = 0;  // -1: mean row, -2: standard-error row
  std::string method;
  std::string status;
  double sum_power = 0.0;
  double ee = 0.0;
  double sum_rate = 0.0;
  double iterations = 0.0;
  double wall_ms = 0.0;
};

namespace detail {

inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline ResultRow run_single(const ScenarioConfig& cfg, const MethodSpec& m, int trial,
                            const AltOptParams& prm) {
  ResultRow row;
  row.trial = trial;
  row.L = cfg.L;
  row.method = m.id();
  row.status = "ok";

  const ChannelRealization ch = sample_channels(cfg, trial);
  const RVec r_min = rate_targets_sic(cfg, ch);

  if (m.access == "noma") {
    const CVec w0 = random_phases(cfg, trial);
    if (m.problem == "powermin") {
      Beamformer bf = Beamformer::manifold;
      if (m.beamformer == "sdr") bf = Beamformer::sdr;
      else if (m.beamformer == "aligned") bf = Beamformer::aligned;
      else if (m.beamformer == "random") bf = Beamformer::random_fixed;
      else if (m.beamformer == "manifold_maxmin") bf = Beamformer::manifold;
      AltOptResult res = alt_opt_powermin(ch, cfg, bf, w0, prm);
      row.sum_power = res.p.sum();
      row.sum_rate = res.rates.sum();
      row.ee = row.sum_power > 0 ? row.sum_rate / row.sum_power : 0.0;
      row.iterations = res.iterations;
    } else {
      EeBeamformer bf = EeBeamformer::manifold_maxmin;
      if (m.beamformer == "sdr") bf = EeBeamformer::sdr_obj;
      else if (m.beamformer == "manifold") bf = EeBeamformer::manifold_obj;
      EeAltResult res = alt_opt_ee(ch, cfg, bf, w0, prm);
      row.sum_power = res.p.sum();
      row.sum_rate = res.rates.sum();
      row.ee = res.ee;
      row.iterations = res.iterations;
    }
  } else {
    RVec c(ch.users());
    for (int k = 0; k < ch.users(); ++k) c(k) = aligned_gain(ch, k);
    OmaAllocation alloc;
    if (m.problem == "powermin")
      alloc = m.access == "oma_equal" ? oma_equal_share(c, r_min, cfg.sigma2)
                                      : oma_powermin(c, r_min, cfg.sigma2);
    else
      alloc = oma_ee_max(c, r_min, cfg.sigma2, cfg.P_max, m.access == "oma_equal");
    row.sum_power = alloc.avg_power;
    row.sum_rate = alloc.sum_rate;
    row.ee = alloc.ee;
    row.iterations = 1;
  }
  return row;
}

}  // namespace detail

/// Runs the full sweep: one row per (L, trial, method) plus mean and
/// standard-error rows per (L, method) computed over the successful trials.
/// Per-trial failures become status rows and never abort the sweep. Output is
/// deterministic for a fixed spec; wall times are recorded only when
/// spec.timing is set.
inline std::vector<ResultRow> run_experiment(const ExperimentSpec& spec,
                                             const AltOptParams& prm = {}) {
  spec.validate();
  std::vector<ResultRow> rows;

  for (int L : spec.L_sweep) {
    ScenarioConfig cfg = spec.cfg;
    cfg.L = L;
    for (int trial = 0; trial < spec.trials; ++trial) {
      for (const MethodSpec& m : spec.methods) {
        ResultRow row;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          row = detail::run_single(cfg, m, trial, prm);
        } catch (const std::exception& err) {
          row.L = L;
          row.trial = trial;
          row.method = m.id();
          row.status = std::string("failed: ") + err.what();
        }
        if (spec.timing) {
          const auto t1 = std::chrono::steady_clock::now();
          row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        rows.push_back(std::move(row));
      }
    }
  }

  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.L != b.L) return a.L < b.L;
    if (a.trial != b.trial) return a.trial < b.trial;
    return a.method < b.method;
  });

  // per-(L, method) aggregates from the emitted rows
  std::vector<ResultRow> aggregates;
  for (int L : spec.L_sweep) {
    for (const MethodSpec& m : spec.methods) {
      std::vector<const ResultRow*> ok_rows;
      for (const ResultRow& r : rows)
        if (r.L == L && r.method == m.id() && r.status == "ok") ok_rows.push_back(&r);
      if (ok_rows.empty()) continue;
      const double n = static_cast<double>(ok_rows.size());
      const auto mean_of = [&](auto field) {
        double s = 0.0;
        for (const ResultRow* r : ok_rows) s += r->*field;
        return s / n;
      };
      const auto sem_of = [&](auto field, double mean) {
        if (ok_rows.size() < 2) return 0.0;
        double s = 0.0;
        for (const ResultRow* r : ok_rows) s += (r->*field - mean) * (r->*field - mean);
        return std::sqrt(s / (n * (n - 1.0)));
      };
      ResultRow mean_row;
      mean_row.L = L;
      mean_row.trial = -1;
      mean_row.method = m.id();
      mean_row.status = "mean";
      mean_row.sum_power = mean_of(&ResultRow::sum_power);
      mean_row.ee = mean_of(&ResultRow::ee);
      mean_row.sum_rate = mean_of(&ResultRow::sum_rate);
      mean_row.iterations = mean_of(&ResultRow::iterations);
      mean_row.wall_ms = mean_of(&ResultRow::wall_ms);
      ResultRow sem_row = mean_row;
      sem_row.trial = -2;
      sem_row.status = "sem";
      sem_row.sum_power = sem_of(&ResultRow::sum_power, mean_row.sum_power);
      sem_row.ee = sem_of(&ResultRow::ee, mean_row.ee);
      sem_row.sum_rate = sem_of(&ResultRow::sum_rate, mean_row.sum_rate);
      sem_row.iterations = sem_of(&ResultRow::iterations, mean_row.iterations);
      sem_row.wall_ms = sem_of(&ResultRow::wall_ms, mean_row.wall_ms);
      aggregates.push_back(std::move(mean_row));
      aggregates.push_back(std::move(sem_row));
    }
  }
  rows.insert(rows.end(), aggregates.begin(), aggregates.end());
  return rows;
}

inline constexpr const char* kCsvHeader =
    "L,trial,method,status,sum_power_W,ee_bits_per_Hz_per_W,sum_rate_bits_per_Hz,iterations,"
    "wall_time_ms";

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << "\n";
  for (const ResultRow& r : rows) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',') ch = ';';
    os << r.L << ',' << r.trial << ',' << r.method << ',' << status << ','
       << detail::fmt_g(r.sum_power) << ',' << detail::fmt_g(r.ee) << ','
       << detail::fmt_g(r.sum_rate) << ',' << detail::fmt_g(r.iterations) << ','
       << detail::fmt_g(r.wall_ms) << "\n";
  }
}

inline nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  nlohmann::json j;
  j["scenario"] = {
      {"K", spec.cfg.K},
      {"L", spec.cfg.L},
      {"d_IB", spec.cfg.d_IB},
      {"d_UI", spec.cfg.d_UI},
      {"d_UB", spec.cfg.d_UB},
      {"alpha_BU", spec.cfg.alpha_BU},
      {"alpha_IU", spec.cfg.alpha_IU},
      {"alpha_BI", spec.cfg.alpha_BI},
      {"eta0", spec.cfg.eta0},
      {"K_IB", spec.cfg.K_IB},
      {"K_UI", spec.cfg.K_UI},
      {"sigma2_W", spec.cfg.sigma2},
      {"R_min", spec.cfg.R_min},
      {"P_max_W", spec.cfg.P_max},
      {"seed", spec.cfg.seed},
      {"los_angle_g", spec.cfg.los_angle_g},
      {"los_angles_h", spec.cfg.los_angles_h},
  };
  j["L_sweep"] = spec.L_sweep;
  j["trials"] = spec.trials;
  std::vector<std::string> methods;
  for (const MethodSpec& m : spec.methods) methods.push_back(m.id());
  j["methods"] = methods;
  j["out"] = spec.out;
  j["timing"] = spec.timing;
  return j;
}

/// Writes <out>.csv and the resolved-spec sidecar <out>.json.
inline void write_results(const ExperimentSpec& spec, const std::vector<ResultRow>& rows) {
  std::string base = spec.out;
  if (base.size() > 4 && base.substr(base.size() - 4) == ".csv") base.resize(base.size() - 4);
  {
    std::ofstream csv(base + ".csv");
    if (!csv) throw std::runtime_error("cannot open output file: " + base + ".csv");
    write_csv(csv, rows);
  }
  std::ofstream side(base + ".json");
  if (!side) throw std::runtime_error("cannot open output file: " + base + ".json");
  side << spec_to_json(spec).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// structured-text configuration files: `key = value` lines, '#' comments,
// comma-separated lists, and explicit dB/dBm unit suffixes on scalars.

namespace detail {

struct ConfigValue {
  std::string raw;
  int line = 0;
};

inline std::map<std::string, ConfigValue> parse_kv(std::istream& in) {
  std::map<std::string, ConfigValue> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (strip(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
    out[key] = {value, lineno};
  }
  return out;
}

// "x", "x dB" or "x dBm"; power=true converts dBm to watts, otherwise dB to
// a linear factor.
inline double scalar_with_unit(const std::string& text, int line) {
  std::string num = text;
  std::string unit;
  const auto sp = text.find_last_of(" \t");
  if (sp != std::string::npos) {
    num = text.substr(0, sp);
    unit = text.substr(sp + 1);
  }
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(num, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  while (used < num.size() && (num[used] == ' ' || num[used] == '\t')) ++used;
  if (used != num.size())
    throw std::invalid_argument("config line " + std::to_string(line) + ": bad number '" + text + "'");
  if (unit.empty()) return x;
  if (unit == "dBm") return dbm_to_watt(x);
  if (unit == "dB") return db_to_linear(x);
  throw std::invalid_argument("config line " + std::to_string(line) + ": unknown unit '" + unit + "'");
}

inline std::vector<double> list_with_units(const std::string& text, int line) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("config line " + std::to_string(line) + ": empty list item");
    out.push_back(scalar_with_unit(item.substr(b, e - b + 1), line));
  }
  if (out.empty()) throw std::invalid_argument("config line " + std::to_string(line) + ": empty list");
  return out;
}

}  // namespace detail

/// Applies scenario keys from a parsed key/value map; unknown keys throw.
inline void apply_scenario_keys(ScenarioConfig& cfg, std::map<std::string, detail::ConfigValue>& kv) {
  const auto take = [&kv](const char* key) -> std::optional<detail::ConfigValue> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("K")) cfg.K = static_cast<int>(detail::scalar_with_unit(v->raw, v->line));
  if (auto v = take("L")) cfg.L = static_cast<int>(detail::scalar_with_unit(v->raw, v->line));
  if (auto v = take("d_IB")) cfg.d_IB = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("d_UI")) cfg.d_UI = detail::list_with_units(v->raw, v->line);
  if (auto v = take("d_UB")) cfg.d_UB = detail::list_with_units(v->raw, v->line);
  if (auto v = take("alpha_BU")) cfg.alpha_BU = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("alpha_IU")) cfg.alpha_IU = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("alpha_BI")) cfg.alpha_BI = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("eta0")) cfg.eta0 = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("K_IB")) cfg.K_IB = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("K_UI")) cfg.K_UI = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("sigma2")) cfg.sigma2 = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("R_min")) cfg.R_min = detail::list_with_units(v->raw, v->line);
  if (auto v = take("P_max")) cfg.P_max = detail::scalar_with_unit(v->raw, v->line);
  if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(detail::scalar_with_unit(v->raw, v->line));
  if (auto v = take("los_angle_g")) cfg.los_angle_g = detail::list_with_units(v->raw, v->line);
  if (auto v = take("los_angles_h")) cfg.los_angles_h = detail::list_with_units(v->raw, v->line);
}

/// Parses a scenario file; every key must be known.
inline ScenarioConfig parse_scenario(std::istream& in) {
  auto kv = detail::parse_kv(in);
  ScenarioConfig cfg;
  apply_scenario_keys(cfg, kv);
  if (!kv.empty())
    throw std::invalid_argument("unknown scenario key '" + kv.begin()->first + "' (line " +
                                std::to_string(kv.begin()->second.line) + ")");
  cfg.validate();
  return cfg;
}

/// Parses an experiment file: scenario keys plus problem/access/beamformer or
/// a methods list, L_sweep, trials, out, timing.
inline ExperimentSpec parse_experiment(std::istream& in) {
  auto kv = detail::parse_kv(in);
  ExperimentSpec spec;
  apply_scenario_keys(spec.cfg, kv);

  const auto take = [&kv](const char* key) -> std::optional<detail::ConfigValue> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("L_sweep")) {
    spec.L_sweep.clear();
    for (double x : detail::list_with_units(v->raw, v->line)) spec.L_sweep.push_back(static_cast<int>(x));
  }
  if (auto v = take("trials")) spec.trials = static_cast<int>(detail::scalar_with_unit(v->raw, v->line));
  if (auto v = take("out")) spec.out = v->raw;
  if (auto v = take("timing")) spec.timing = detail::scalar_with_unit(v->raw, v->line) != 0.0;

  if (auto v = take("methods")) {
    std::istringstream ms(v->raw);
    std::string item;
    while (std::getline(ms, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      spec.methods.push_back(parse_method(item.substr(b, e - b + 1)));
    }
  } else {
    std::string problem = "powermin", access = "noma", beamformer = "manifold";
    if (auto v = take("problem")) problem = v->raw;
    if (auto v = take("access")) access = v->raw;
    if (auto v = take("beamformer")) beamformer = v->raw;
    spec.methods.push_back(parse_method(problem + "/" + access + "/" + beamformer));
  }
  take("problem");
  take("access");
  take("beamformer");
  if (!kv.empty())
    throw std::invalid_argument("unknown experiment key '" + kv.begin()->first + "' (line " +
                                std::to_string(kv.begin()->second.line) + ")");
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// presets mirroring the reference simulation sweeps at desk scale

inline std::vector<std::string> preset_names() {
  return {"fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b",
          "fig5a", "fig5b", "fig6a", "fig6b", "fig7a", "fig7b"};
}

/// Named experiment presets: sum-power (fig2/fig6), NOMA EE (fig3/fig7),
/// OMA-vs-NOMA EE (fig4) and sum-rate (fig5) sweeps, each for 2-user ("a")
/// and 3-user ("b") clusters; fig6/fig7 use the high-rate regime.
inline ExperimentSpec preset(const std::string& name) {
  if (name.size() != 5 || name.substr(0, 3) != "fig" || (name[4] != 'a' && name[4] != 'b'))
    throw std::invalid_argument("unknown preset: " + name);
  const int fig = name[3] - '0';
  if (fig < 2 || fig > 7) throw std::invalid_argument("unknown preset: " + name);
  const int users = name[4] == 'a' ? 2 : 3;
  const bool high_rate = fig >= 6;

  ExperimentSpec spec;
  spec.cfg = ScenarioConfig::defaults_for_users(users);
  const double rate = high_rate ? (users == 2 ? 4.0 : 2.5) : 0.2;
  spec.cfg.R_min.assign(static_cast<std::size_t>(users), rate);
  spec.L_sweep = {8, 16, 24, 32};
  spec.trials = 50;
  spec.out = name;

  const auto add = [&spec](const char* s) { spec.methods.push_back(parse_method(s)); };
  switch (fig) {
    case 2:
    case 6:
      add("powermin/noma/manifold");
      add("powermin/noma/sdr");
      add("powermin/oma");
      add("eemax/noma/manifold_maxmin");
      add("eemax/oma");
      break;
    case 3:
    case 7:
      add("eemax/noma/manifold_maxmin");
      add("eemax/noma/manifold");
      add("eemax/noma/sdr");
      add("powermin/noma/manifold");
      break;
    case 4:
      add("eemax/noma/manifold_maxmin");
      add("eemax/oma");
      add("eemax/oma_equal");
      add("powermin/oma");
      break;
    case 5:
      add("powermin/noma/manifold");
      add("eemax/noma/manifold_maxmin");
      add("powermin/oma");
      add("eemax/oma");
      break;
    default:
      break;
  }
  return spec;
}

}  // namespace irsnoma
