#include "irsnoma/harness.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

using namespace irsnoma;

namespace {

AltOptParams quick_params() {
  AltOptParams prm;
  prm.penalty.inner.max_iters = 120;
  prm.penalty.max_outer = 10;
  prm.max_iters = 8;
  return prm;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.cfg = ScenarioConfig::defaults_for_users(2);
  spec.cfg.seed = 12;
  spec.L_sweep = {6};
  spec.trials = 2;
  spec.methods = {parse_method("powermin/noma/manifold"), parse_method("powermin/oma")};
  return spec;
}

}  // namespace

TEST(ParseMethod, AcceptsKnownCombinationsRejectsOthers) {
  EXPECT_EQ(parse_method("powermin/noma/manifold").id(), "powermin/noma/manifold");
  EXPECT_EQ(parse_method("eemax/noma/manifold_maxmin").id(), "eemax/noma/manifold_maxmin");
  EXPECT_EQ(parse_method("powermin/oma").id(), "powermin/oma/aligned");
  EXPECT_EQ(parse_method("eemax/oma_equal").beamformer, "aligned");
  EXPECT_THROW(parse_method("minimize/noma/manifold"), std::invalid_argument);
  EXPECT_THROW(parse_method("powermin/noma/magic"), std::invalid_argument);
  EXPECT_THROW(parse_method("eemax/noma/random"), std::invalid_argument);
  EXPECT_THROW(parse_method("powermin"), std::invalid_argument);
}

TEST(RunExperiment, ShapeOneTrialOneMethod) {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 1;
  spec.methods = {parse_method("powermin/noma/manifold")};
  const auto rows = run_experiment(spec, quick_params());
  ASSERT_EQ(rows.size(), 3u);  // data + mean + sem
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[1].status, "mean");
  EXPECT_EQ(rows[2].status, "sem");
  EXPECT_EQ(rows[1].sum_power, rows[0].sum_power);
  EXPECT_EQ(rows[2].sum_power, 0.0);  // single trial: no spread
}

TEST(RunExperiment, DeterministicByteIdenticalCsv) {
  const ExperimentSpec spec = tiny_spec();
  std::ostringstream a, b;
  write_csv(a, run_experiment(spec, quick_params()));
  write_csv(b, run_experiment(spec, quick_params()));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("powermin/oma/aligned"), std::string::npos);
}

TEST(RunExperiment, AggregatesReproduceFromRows) {
  const ExperimentSpec spec = tiny_spec();
  const auto rows = run_experiment(spec, quick_params());
  for (const auto& agg : rows) {
    if (agg.status != "mean") continue;
    double acc = 0.0;
    int n = 0;
    for (const auto& r : rows)
      if (r.status == "ok" && r.L == agg.L && r.method == agg.method) {
        acc += r.sum_power;
        ++n;
      }
    ASSERT_GT(n, 0);
    EXPECT_DOUBLE_EQ(agg.sum_power, acc / n);
  }
}

TEST(RunExperiment, PowerMinRatesSitAtTargets) {
  ExperimentSpec spec = tiny_spec();
  spec.methods = {parse_method("powermin/noma/manifold"), parse_method("powermin/oma")};
  const double target = spec.cfg.R_min[0] + spec.cfg.R_min[1];
  const auto rows = run_experiment(spec, quick_params());
  for (const auto& r : rows)
    if (r.status == "ok") EXPECT_NEAR(r.sum_rate, target, 1e-3);
}

TEST(Presets, KnownNamesAndParameters) {
  EXPECT_EQ(preset_names().size(), 12u);
  const ExperimentSpec fig2a = preset("fig2a");
  EXPECT_EQ(fig2a.cfg.K, 2);
  EXPECT_DOUBLE_EQ(fig2a.cfg.R_min[0], 0.2);
  EXPECT_EQ(fig2a.trials, 50);
  bool has_sdr = false, has_manifold = false, has_oma = false;
  for (const auto& m : fig2a.methods) {
    has_sdr |= m.id() == "powermin/noma/sdr";
    has_manifold |= m.id() == "powermin/noma/manifold";
    has_oma |= m.access == "oma";
  }
  EXPECT_TRUE(has_sdr && has_manifold && has_oma);

  const ExperimentSpec fig6a = preset("fig6a");
  EXPECT_DOUBLE_EQ(fig6a.cfg.R_min[0], 4.0);
  const ExperimentSpec fig6b = preset("fig6b");
  EXPECT_DOUBLE_EQ(fig6b.cfg.R_min[0], 2.5);

  const ExperimentSpec fig2b = preset("fig2b");
  EXPECT_EQ(fig2b.cfg.K, 3);
  EXPECT_EQ(fig2b.cfg.d_UI, (std::vector<double>{10.0, 20.0, 40.0}));
  EXPECT_EQ(fig2b.cfg.d_UB, (std::vector<double>{30.0, 50.0, 200.0}));

  EXPECT_THROW(preset("fig9a"), std::invalid_argument);
  EXPECT_THROW(preset("nonsense"), std::invalid_argument);
}

TEST(Presets, DefaultNoisePowerMatchesReferenceSetup) {
  const ExperimentSpec spec = preset("fig2a");
  EXPECT_NEAR(spec.cfg.sigma2, std::pow(10.0, -14.4), 1e-25);
  EXPECT_DOUBLE_EQ(spec.cfg.d_IB, 75.0);
  EXPECT_DOUBLE_EQ(spec.cfg.alpha_BU, 5.5);
  EXPECT_DOUBLE_EQ(spec.cfg.K_IB, 2.2);
  EXPECT_DOUBLE_EQ(spec.cfg.K_UI, 2.2);
}

TEST(ConfigParsing, UnitSuffixesAndOverrides) {
  std::istringstream in(
      "K = 2\n"
      "L = 10\n"
      "# comment line\n"
      "sigma2 = -114 dBm\n"
      "eta0 = -30 dB\n"
      "R_min = 0.5, 0.7\n"
      "d_UI = 10, 20\n"
      "d_UB = 30, 50\n"
      "seed = 42\n");
  const ScenarioConfig cfg = parse_scenario(in);
  EXPECT_EQ(cfg.L, 10);
  EXPECT_NEAR(cfg.sigma2, std::pow(10.0, -14.4), 1e-25);
  EXPECT_NEAR(cfg.eta0, 1e-3, 1e-15);
  EXPECT_DOUBLE_EQ(cfg.R_min[1], 0.7);
  EXPECT_EQ(cfg.seed, 42u);
}

TEST(ConfigParsing, RejectsUnknownKeysAndBadValues) {
  {
    std::istringstream in("K = 2\nwhatever = 3\n");
    EXPECT_THROW(parse_scenario(in), std::invalid_argument);
  }
  {
    std::istringstream in("K = two\n");
    EXPECT_THROW(parse_scenario(in), std::invalid_argument);
  }
  {
    std::istringstream in("sigma2 = -114 dBfoo\n");
    EXPECT_THROW(parse_scenario(in), std::invalid_argument);
  }
  {
    std::istringstream in("K 2\n");
    EXPECT_THROW(parse_scenario(in), std::invalid_argument);
  }
}

TEST(ConfigParsing, ExperimentFileWithMethodsList) {
  std::istringstream in(
      "K = 2\n"
      "L_sweep = 8, 16\n"
      "trials = 3\n"
      "methods = powermin/noma/manifold, eemax/oma\n"
      "out = /tmp/exp_test\n");
  const ExperimentSpec spec = parse_experiment(in);
  EXPECT_EQ(spec.L_sweep, (std::vector<int>{8, 16}));
  EXPECT_EQ(spec.trials, 3);
  ASSERT_EQ(spec.methods.size(), 2u);
  EXPECT_EQ(spec.methods[1].id(), "eemax/oma/aligned");
}

TEST(ConfigParsing, ExperimentFileSingleMethodForm) {
  std::istringstream in(
      "problem = eemax\n"
      "access = noma\n"
      "beamformer = manifold_maxmin\n"
      "trials = 1\n");
  const ExperimentSpec spec = parse_experiment(in);
  ASSERT_EQ(spec.methods.size(), 1u);
  EXPECT_EQ(spec.methods[0].id(), "eemax/noma/manifold_maxmin");
}

TEST(WriteResults, EmitsCsvAndJsonSidecar) {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 1;
  spec.methods = {parse_method("powermin/oma")};
  spec.out = std::string(::testing::TempDir()) + "irsnoma_out";
  const auto rows = run_experiment(spec, quick_params());
  write_results(spec, rows);
  std::ifstream csv(spec.out + ".csv");
  ASSERT_TRUE(csv.good());
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, kCsvHeader);
  std::ifstream side(spec.out + ".json");
  ASSERT_TRUE(side.good());
  nlohmann::json j;
  side >> j;
  EXPECT_EQ(j["trials"], 1);
  EXPECT_EQ(j["scenario"]["K"], 2);
  std::remove((spec.out + ".csv").c_str());
  std::remove((spec.out + ".json").c_str());
}

TEST(RunExperiment, FailuresBecomeStatusRows) {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 1;
  spec.methods = {parse_method("eemax/noma/manifold_maxmin")};
  spec.cfg.P_max = 1e-30;  // power cap far below any feasible allocation
  const auto rows = run_experiment(spec, quick_params());
  ASSERT_FALSE(rows.empty());
  EXPECT_NE(rows[0].status.find("failed"), std::string::npos);
}
