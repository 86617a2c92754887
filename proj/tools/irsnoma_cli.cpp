// Command-line front end: run Monte-Carlo experiment sweeps, list presets,
// and run a quick numerical self-check.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "irsnoma/harness.hpp"

namespace {

using namespace irsnoma;

int cmd_run(const std::string& spec_path, const std::string& preset_name, std::uint64_t seed,
            int trials, const std::string& l_list, const std::string& out,
            const std::string& problem, const std::string& access, const std::string& beamformer,
            bool timing) {
  ExperimentSpec spec;
  if (!preset_name.empty()) {
    spec = preset(preset_name);
  } else if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) {
      std::cerr << "cannot open spec file: " << spec_path << "\n";
      return 1;
    }
    spec = parse_experiment(in);
  } else {
    std::cerr << "either --spec or --preset is required\n";
    return 1;
  }

  if (seed != 0) spec.cfg.seed = seed;
  if (trials > 0) spec.trials = trials;
  if (!l_list.empty()) {
    spec.L_sweep.clear();
    std::istringstream in(l_list);
    std::string item;
    while (std::getline(in, item, ',')) spec.L_sweep.push_back(std::stoi(item));
  }
  if (!out.empty()) spec.out = out;
  if (!problem.empty() || !access.empty() || !beamformer.empty()) {
    MethodSpec base = spec.methods.empty() ? parse_method("powermin/noma/manifold") : spec.methods[0];
    if (!problem.empty()) base.problem = problem;
    if (!access.empty()) base.access = access;
    if (!beamformer.empty()) base.beamformer = beamformer;
    spec.methods = {parse_method(base.problem + "/" + base.access + "/" + base.beamformer)};
  }
  spec.timing = timing;
  spec.validate();

  std::cout << "running " << spec.methods.size() << " method(s), " << spec.trials
            << " trial(s), L in {";
  for (std::size_t i = 0; i < spec.L_sweep.size(); ++i)
    std::cout << (i ? "," : "") << spec.L_sweep[i];
  std::cout << "}\n";

  const std::vector<ResultRow> rows = run_experiment(spec);
  write_results(spec, rows);

  std::cout << "\naggregates (mean over ok trials):\n";
  std::printf("%4s  %-34s %14s %14s %12s\n", "L", "method", "sum_power_W", "ee_b/Hz/W", "sum_rate");
  for (const ResultRow& r : rows)
    if (r.status == "mean")
      std::printf("%4d  %-34s %14.6g %14.6g %12.6g\n", r.L, r.method.c_str(), r.sum_power, r.ee,
                  r.sum_rate);
  std::string base = spec.out;
  if (base.size() > 4 && base.substr(base.size() - 4) == ".csv") base.resize(base.size() - 4);
  std::cout << "\nwrote " << base << ".csv and " << base << ".json\n";
  return 0;
}

int cmd_presets() {
  for (const std::string& name : preset_names()) {
    const ExperimentSpec spec = preset(name);
    std::printf("%-6s K=%d R_min=%.3g  methods:", name.c_str(), spec.cfg.K, spec.cfg.R_min[0]);
    for (const MethodSpec& m : spec.methods) std::printf(" %s", m.id().c_str());
    std::printf("\n");
  }
  return 0;
}

// Quick invariant sweep over the core numerics; exits nonzero on any failure.
int cmd_check() {
  int failures = 0;
  const auto report = [&failures](const char* name, bool pass, const std::string& detail = "") {
    std::printf("%-44s %s%s%s\n", name, pass ? "PASS" : "FAIL", detail.empty() ? "" : "  ",
                detail.c_str());
    if (!pass) ++failures;
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto rand_cvec = [&](int n) {
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(2 * unif(rng) - 1, 2 * unif(rng) - 1);
    return v;
  };
  const auto rand_phases = [&](int n) {
    CVec w(n);
    for (int i = 0; i < n; ++i) w(i) = std::polar(1.0, 2 * M_PI * unif(rng));
    return w;
  };

  {  // manifold geometry
    double worst_tan = 0.0, worst_idem = 0.0, worst_mod = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const CVec w = rand_phases(8);
      const CVec v = rand_cvec(8);
      const CVec xi = project_tangent(w, v);
      for (int i = 0; i < 8; ++i)
        worst_tan = std::max(worst_tan, std::abs((xi(i) * std::conj(w(i))).real()));
      worst_idem = std::max(worst_idem, (project_tangent(w, xi) - xi).norm());
      const CVec r = retract(w, xi);
      for (int i = 0; i < 8; ++i) worst_mod = std::max(worst_mod, std::abs(std::abs(r(i)) - 1.0));
    }
    report("tangent projection / retraction", worst_tan < 1e-10 && worst_idem < 1e-12 && worst_mod < 1e-14);
  }

  {  // analytic gradients vs central differences
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      const int L = 6, K = 3;
      std::vector<CVec> dhat;
      CVec vhat(K);
      RVec p(K), r(K);
      for (int k = 0; k < K; ++k) {
        dhat.push_back(rand_cvec(L));
        vhat(k) = cplx(unif(rng), unif(rng));
        p(k) = 0.5 + unif(rng);
        r(k) = 0.2 + unif(rng);
      }
      ConstraintSet cs(dhat, vhat, p, r);
      const CVec w = rand_phases(L);
      const auto ev = penalized_objective_powermin(cs, w, 3.0, 1e-3, 64.0);
      const double h = 1e-6;
      for (int i = 0; i < L; ++i) {
        for (int part = 0; part < 2; ++part) {
          CVec wp = w, wm = w;
          const cplx delta = part == 0 ? cplx(h, 0) : cplx(0, h);
          wp(i) += delta;
          wm(i) -= delta;
          const double fd = (penalized_objective_powermin(cs, wp, 3.0, 1e-3, 64.0).value -
                             penalized_objective_powermin(cs, wm, 3.0, 1e-3, 64.0).value) /
                            (2 * h);
          const double an = part == 0 ? ev.egrad(i).real() : ev.egrad(i).imag();
          worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
        }
      }
    }
    report("penalized objective gradient vs FD", worst < 1e-5);
  }

  {  // power allocation binds every rate constraint
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const int K = 1 + static_cast<int>(unif(rng) * 4);
      RVec a(K), r(K);
      for (int k = 0; k < K; ++k) {
        a(k) = 0.1 + 10 * unif(rng);
        r(k) = 0.1 + 2 * unif(rng);
      }
      const RVec p = solve_power_lp(a, r, 1.0);
      for (int k = 0; k < K; ++k) {
        double interf = 1.0;
        for (int j = k + 1; j < K; ++j) interf += p(j) * a(j);
        const double rate = std::log2(1.0 + p(k) * a(k) / interf);
        worst = std::max(worst, std::abs(rate - r(k)));
      }
    }
    report("power allocation binds rate targets", worst < 1e-9);
  }

  {  // single-log sum rate identity
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const int K = 1 + static_cast<int>(unif(rng) * 3);
      RVec a(K), p(K);
      for (int k = 0; k < K; ++k) {
        a(k) = 0.1 + 5 * unif(rng);
        p(k) = unif(rng);
      }
      double per_user = 0.0;
      for (int k = 0; k < K; ++k) {
        double interf = 1.0;
        for (int j = k + 1; j < K; ++j) interf += p(j) * a(j);
        per_user += std::log2(1.0 + p(k) * a(k) / interf);
      }
      worst = std::max(worst, std::abs(per_user - sum_rate(p, a, 1.0)));
    }
    report("per-user rates telescope to single log", worst < 1e-10);
  }

  {  // smoothing bounds
    bool ok = true;
    for (int t = 0; t < 200; ++t) {
      RVec c(3);
      for (int i = 0; i < 3; ++i) c(i) = 0.01 + 5 * unif(rng);
      const double sm = smooth_min(c, 64.0);
      const double mn = c.minCoeff();
      ok = ok && sm <= mn * (1 + 1e-12) && mn <= sm * std::pow(3.0, 1.0 / 64.0) * (1 + 1e-12);
      const double x = 4 * unif(rng) - 2, u = 0.01 + unif(rng);
      ok = ok && std::abs(smooth_max(x, u) - std::max(0.0, x)) <= u / 2 + 1e-15;
    }
    report("smoothing bounds", ok);
  }

  std::printf("%s\n", failures == 0 ? "all checks passed" : "CHECK FAILURES");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IRS-assisted uplink NOMA power and energy-efficiency optimizer"};
  app.require_subcommand(1);

  std::string spec_path, preset_name, l_list, out, problem, access, beamformer;
  std::uint64_t seed = 0;
  int trials = 0;
  bool timing = false;

  CLI::App* run = app.add_subcommand("run", "run an experiment sweep");
  run->add_option("--spec", spec_path, "experiment spec file (key = value)");
  run->add_option("--preset", preset_name, "named preset (see `presets`)");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--trials", trials, "override the trial count");
  run->add_option("--L", l_list, "override the reflector sweep, e.g. 8,16,32");
  run->add_option("--out", out, "output base path (.csv/.json)");
  run->add_option("--problem", problem, "powermin | eemax");
  run->add_option("--access", access, "noma | oma | oma_equal");
  run->add_option("--beamformer", beamformer, "manifold | sdr | manifold_maxmin | aligned | random");
  run->add_flag("--timing", timing, "record wall-clock times (breaks byte determinism)");

  CLI::App* presets_cmd = app.add_subcommand("presets", "list available presets");
  CLI::App* check = app.add_subcommand("check", "run the quick numerical self-check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(spec_path, preset_name, seed, trials, l_list, out, problem, access,
                     beamformer, timing);
    if (presets_cmd->parsed()) return cmd_presets();
    if (check->parsed()) return cmd_check();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
