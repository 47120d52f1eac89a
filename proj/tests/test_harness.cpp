#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nnde/csv.hpp"
#include "nnde/harness.hpp"

using namespace nnde;

namespace {

ExperimentConfig tiny(std::size_t runs = 3) {
  ExperimentConfig cfg;
  cfg.runs = runs;
  cfg.K = 60;
  cfg.extra_iters = 30;
  cfg.k = 3;
  cfg.M = 20;
  cfg.T = 2.0;
  cfg.width = 8;
  cfg.arms = {Arm::standard, Arm::alg1, Arm::appendix};
  return cfg;
}

}  // namespace

TEST_CASE("arm lists parse and reject unknown names") {
  CHECK(parse_arms("standard,alg1") == std::vector<Arm>{Arm::standard, Arm::alg1});
  CHECK(parse_arms(" appendix , standard ,appendix") == std::vector<Arm>{Arm::appendix, Arm::standard});
  for (Arm a : {Arm::standard, Arm::alg1, Arm::appendix}) CHECK(parse_arm(to_string(a)) == a);
  CHECK_THROWS_AS(parse_arms("standard,nope"), std::invalid_argument);
}

TEST_CASE("configuration invariants") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto broken = [](auto edit) {
    ExperimentConfig c;
    edit(c);
    return c;
  };
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.runs = 0; }).validate());
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.K = 0; }).validate());
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.arms.clear(); }).validate());
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.order = 3; }).validate());
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.system = "pendulum"; }).validate());
  CHECK_THROWS(broken([](ExperimentConfig& c) { c.T = -1.0; }).validate());
}

TEST_CASE("key=value configuration files") {
  ExperimentConfig cfg;
  std::istringstream in(
      "# study settings\n"
      "system = henon-heiles\n"
      "runs=5\n"
      "\n"
      "K=100   # shared phase\n"
      "iters=40\nk=7\nM=30\nT=4.5\nwidth=16\nlr=0.001\norder=1\narms=alg1,appendix\n"
      "parallel=true\nserial-timing=yes\nseed=42\n");
  load_config(cfg, in);
  CHECK(cfg.system == "henon-heiles");
  CHECK(cfg.runs == 5);
  CHECK(cfg.K == 100);
  CHECK(cfg.extra_iters == 40);
  CHECK(cfg.k == 7);
  CHECK(cfg.M == 30);
  CHECK(cfg.T == 4.5);
  CHECK(cfg.width == 16);
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.order == 1);
  CHECK(cfg.arms == std::vector<Arm>{Arm::alg1, Arm::appendix});
  CHECK(cfg.parallel);
  CHECK(cfg.serial_timing);
  CHECK(cfg.seed == 42);
  apply_config_entry(cfg, "runs", "2");
  CHECK(cfg.runs == 2);

  std::istringstream unknown("colour=blue\n");
  CHECK_THROWS_AS(load_config(cfg, unknown), std::invalid_argument);
  std::istringstream no_eq("runs 3\n");
  CHECK_THROWS_AS(load_config(cfg, no_eq), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_entry(cfg, "runs", "-1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_entry(cfg, "parallel", "maybe"), std::invalid_argument);
}

TEST_CASE("oscillator initial conditions stay in the sampling box") {
  const NonlinearOscillator osc;
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const Vec z = sample_initial_conditions(osc, rng);
    CHECK(z[0] >= 0.3);
    CHECK(z[0] <= 2.3);
    CHECK(z[1] >= 0.0);
    CHECK(z[1] <= 2.0);
  }
}

TEST_CASE("Henon-Heiles initial conditions") {
  const HenonHeiles hh;
  Rng rng(2);
  double mean_px = 0.0, mean_py = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Vec z = sample_initial_conditions(hh, rng, false);
    CHECK(std::abs(z[0]) <= 0.5);
    CHECK(z[1] >= -0.5);
    CHECK(z[1] <= std::sqrt(3.0) * (1.0 - std::abs(z[0])));
    mean_px += z[2] / n;
    mean_py += z[3] / n;
  }
  CHECK(mean_px == doctest::Approx(0.25).epsilon(0.05));
  CHECK(mean_py == doctest::Approx(0.10).epsilon(0.1));

  for (int i = 0; i < 500; ++i) {
    const Vec z = sample_initial_conditions(hh, rng);
    CHECK(henon_heiles_bounded(z));
    CHECK(hh.hamiltonian(z) < HenonHeiles::escape_energy);
  }
  // At x = 0 the y range reaches up to sqrt(3); the bounded filter then
  // caps it at the top vertex of the potential triangle.
  CHECK_FALSE(henon_heiles_bounded(Vec{0.0, 1.2, 0.0, 0.0}));
  CHECK(henon_heiles_bounded(Vec{0.0, 0.3, 0.1, 0.1}));
}

TEST_CASE("same seed gives the same initial condition") {
  const HenonHeiles hh;
  Rng a(5), b(5);
  CHECK(sample_initial_conditions(hh, a) == sample_initial_conditions(hh, b));
}

TEST_CASE("median of completed values") {
  CHECK(median({1.0, 2.0, 9.0}) == 2.0);
  CHECK(median({9.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0}) == 4.0);
  CHECK(median({1.0, 3.0}) == 2.0);
  CHECK(std::isnan(median({})));
}

TEST_CASE("arms share exactly the primary phase") {
  ExperimentConfig cfg = tiny();
  cfg.extra_iters = 0;
  const RunResult a = run_seed(cfg, 7, {Arm::standard});
  const RunResult b = run_seed(cfg, 7, {Arm::alg1});
  REQUIRE(a.primary_ok);
  CHECK(a.checkpoint.net == b.checkpoint.net);
  CHECK(a.checkpoint.iteration == cfg.K);
  CHECK(a.z0 == b.z0);
  // With no extra iterations the standard arm is the checkpoint itself.
  CHECK(a.arms.front().metrics.dz_avg == a.primary_dz_avg);
}

TEST_CASE("a single run reports its values, trajectories and timing") {
  const ExperimentConfig cfg = tiny(1);
  const StudyReport r = run_study(cfg);
  REQUIRE(r.runs.size() == 1);
  const RunResult& run = r.runs.front();
  REQUIRE(run.primary_ok);
  CHECK(run.error_times.size() == cfg.k * cfg.M + 1);
  CHECK(run.dz_internal.size() == run.error_times.size());
  CHECK(run.dz_external.size() == run.error_times.size());
  CHECK(run.metric_times.size() == kMetricSamples);
  CHECK(run.discrepancy >= 0.0);
  for (Arm arm : cfg.arms) {
    const ArmResult* a = run.arm(arm);
    REQUIRE(a);
    REQUIRE(a->ok);
    const ArmSummary* s = r.summary(arm);
    REQUIRE(s);
    CHECK(s->completed == 1);
    CHECK(s->failed == 0);
    CHECK(s->median_dz_avg == a->metrics.dz_avg);
    CHECK(s->median_dz_max == a->metrics.dz_max);
    CHECK(s->median_tau == a->metrics.tau);
    CHECK(a->metrics.tau > 0.0);
    CHECK(a->metrics.dz_avg <= a->metrics.dz_max);
    CHECK(a->trajectory.size() == kMetricSamples);
    CHECK(a->trajectory.front() == run.z0);
    CHECK(a->metrics.primary_iterations == cfg.K);
    CHECK(a->metrics.iterations == cfg.extra_iters);
  }
}

TEST_CASE("studies are reproducible, serially and in parallel") {
  ExperimentConfig cfg = tiny(3);
  const StudyReport a = run_study(cfg);
  cfg.parallel = true;
  cfg.serial_timing = true;
  const StudyReport b = run_study(cfg);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].seed == cfg.seed + i);
    CHECK(a.runs[i].checkpoint.net == b.runs[i].checkpoint.net);
    CHECK(a.runs[i].dz_internal == b.runs[i].dz_internal);
    for (std::size_t k = 0; k < a.runs[i].arms.size(); ++k) {
      CHECK(a.runs[i].arms[k].metrics.dz_avg == b.runs[i].arms[k].metrics.dz_avg);
      CHECK(a.runs[i].arms[k].trajectory == b.runs[i].arms[k].trajectory);
    }
  }
  for (std::size_t k = 0; k < a.summaries.size(); ++k)
    CHECK(a.summaries[k].median_dz_avg == b.summaries[k].median_dz_avg);
}

TEST_CASE("failed runs are recorded and excluded from medians") {
  ExperimentConfig cfg = tiny(2);
  cfg.lr = 1e6;
  const StudyReport r = run_study(cfg);
  for (const RunResult& run : r.runs) {
    const bool primary_failed = !run.primary_ok;
    if (primary_failed) CHECK_FALSE(run.error.empty());
  }
  for (const ArmSummary& s : r.summaries) {
    CHECK(s.completed + s.failed == cfg.runs);
    if (s.completed == 0) CHECK(std::isnan(s.median_dz_avg));
  }
  std::size_t failures = 0;
  for (const ArmSummary& s : r.summaries) failures += s.failed;
  CHECK(failures > 0);
}

TEST_CASE("run_arm raises on failure with the arm and seed in the message") {
  ExperimentConfig cfg = tiny(1);
  cfg.lr = 1e6;
  try {
    run_arm(cfg, Arm::standard, 3);
    FAIL("expected failure");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("standard") != std::string::npos);
    CHECK(what.find("seed 3") != std::string::npos);
  }
}

TEST_CASE("study outputs land on disk with the expected columns") {
  const ExperimentConfig cfg = tiny(2);
  const StudyReport r = run_study(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "nnde_harness_test";
  std::filesystem::remove_all(dir);
  write_study_outputs(dir, r);

  std::ifstream study(dir / "study.csv");
  const CsvTable s = [&] {
    std::string header;
    std::getline(study, header);
    CsvTable t;
    t.header = split_csv_line(header);
    return t;
  }();
  CHECK(s.header == std::vector<std::string>{"arm", "seed", "tau", "dz_avg", "dz_max", "bound", "discrepancy"});

  std::ifstream errors(dir / "errors_0.csv");
  const CsvTable e = read_csv(errors);
  CHECK(e.header == std::vector<std::string>{"t", "dz_internal_1", "dz_internal_2", "dz_external_1", "dz_external_2"});
  CHECK(e.rows.size() == cfg.k * cfg.M + 1);

  std::ifstream traj(dir / "trajectory_1.csv");
  const CsvTable t = read_csv(traj);
  CHECK(t.header.front() == "t");
  CHECK(t.rows.size() == kMetricSamples);

  CHECK(std::filesystem::exists(dir / "summary.csv"));
  CHECK(std::filesystem::exists(dir / "bounds.csv"));
  std::filesystem::remove_all(dir);
}
