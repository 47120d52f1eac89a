#include "nnde/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "nnde/correction.hpp"
#include "nnde/csv.hpp"

namespace nnde {

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::standard: return "standard";
    case Arm::alg1: return "alg1";
    case Arm::appendix: return "appendix";
  }
  return "?";
}

Arm parse_arm(std::string_view text) {
  if (text == "standard") return Arm::standard;
  if (text == "alg1") return Arm::alg1;
  if (text == "appendix") return Arm::appendix;
  throw std::invalid_argument("unknown arm '" + std::string(text) + "'");
}

std::vector<Arm> parse_arms(std::string_view text) {
  std::vector<Arm> arms;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    std::string_view item = text.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const Arm a = parse_arm(item);
      if (std::find(arms.begin(), arms.end(), a) == arms.end()) arms.push_back(a);
    }
    start = end + 1;
  }
  return arms;
}

void ExperimentConfig::validate() const {
  make_system(system);
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (arms.empty()) throw std::invalid_argument("at least one arm is required");
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (M < 2) throw std::invalid_argument("M must be >= 2");
  if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (order != 1 && order != 2) throw std::invalid_argument("order must be 1 or 2");
}

SolverConfig ExperimentConfig::solver_config() const {
  SolverConfig sc;
  sc.horizon = T;
  sc.batch = M;
  sc.width = width;
  sc.adam.learning_rate = lr;
  return sc;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size() || x < 0) throw std::invalid_argument(key + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": expected a boolean");
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in) {
  const std::string key = trim(key_in);
  const std::string v = trim(value_in);
  if (key == "system") cfg.system = v;
  else if (key == "runs") cfg.runs = to_count(key, v);
  else if (key == "seed") cfg.seed = to_count(key, v);
  else if (key == "K") cfg.K = to_count(key, v);
  else if (key == "iters") cfg.extra_iters = to_count(key, v);
  else if (key == "k") cfg.k = to_count(key, v);
  else if (key == "M") cfg.M = to_count(key, v);
  else if (key == "T") cfg.T = parse_double(v);
  else if (key == "width") cfg.width = to_count(key, v);
  else if (key == "lr") cfg.lr = parse_double(v);
  else if (key == "order") cfg.order = static_cast<int>(to_count(key, v));
  else if (key == "arms") cfg.arms = parse_arms(v);
  else if (key == "scale-correction") cfg.scale_correction = to_bool(key, v);
  else if (key == "parallel") cfg.parallel = to_bool(key, v);
  else if (key == "serial-timing") cfg.serial_timing = to_bool(key, v);
  else throw std::invalid_argument("unknown configuration key '" + key + "'");
}

void load_config(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    apply_config_entry(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
  }
}

bool henon_heiles_bounded(std::span<const double> z) {
  const double x = z[0], y = z[1];
  const HenonHeiles hh;
  return hh.hamiltonian(z) < HenonHeiles::escape_energy && y > -0.5 && y < 1.0 - std::sqrt(3.0) * std::abs(x);
}

Vec sample_initial_conditions(const DynamicalSystem& sys, Rng& rng, bool bounded_only) {
  const std::string name = sys.name();
  if (name == "nl-osc") {
    std::uniform_real_distribution<double> ux(0.3, 2.3);
    std::uniform_real_distribution<double> up(0.0, 2.0);
    const double x = ux(rng);
    const double p = up(rng);
    return {x, p};
  }
  if (name == "henon-heiles") {
    std::uniform_real_distribution<double> ux(-0.5, 0.5);
    std::normal_distribution<double> npx(0.25, 0.1);
    std::normal_distribution<double> npy(0.10, 0.1);
    for (;;) {
      const double x = ux(rng);
      std::uniform_real_distribution<double> uy(-0.5, std::sqrt(3.0) * (1.0 - std::abs(x)));
      const double y = uy(rng);
      const double px = npx(rng);
      const double py = npy(rng);
      Vec z{x, y, px, py};
      if (!bounded_only || henon_heiles_bounded(z)) return z;
    }
  }
  throw std::invalid_argument("no initial-condition sampler for system '" + name + "'");
}

const ArmResult* RunResult::arm(Arm a) const {
  for (const auto& r : arms)
    if (r.arm == a) return &r;
  return nullptr;
}

const ArmSummary* StudyReport::summary(Arm a) const {
  for (const auto& s : summaries)
    if (s.arm == a) return &s;
  return nullptr;
}

namespace {

// Held around timed phases when timing runs must not overlap.
std::mutex& timing_mutex() {
  static std::mutex m;
  return m;
}

class TimingGuard {
 public:
  explicit TimingGuard(bool enabled) {
    if (enabled) lock_ = std::unique_lock<std::mutex>(timing_mutex());
  }

 private:
  std::unique_lock<std::mutex> lock_;
};

MetricsReport base_report(const ExperimentConfig& cfg, Arm arm, std::uint64_t seed) {
  MetricsReport m;
  m.system = cfg.system;
  m.arm = std::string(to_string(arm));
  m.seed = seed;
  m.primary_iterations = cfg.K;
  m.iterations = cfg.extra_iters;
  return m;
}

void fill_trajectory(ArmResult& r, const RunResult& run, const ErrorMetrics& err) {
  r.trajectory.reserve(err.dz.size());
  for (std::size_t n = 0; n < err.dz.size(); ++n) r.trajectory.push_back(sub(run.reference[n], err.dz[n]));
}

}  // namespace

RunResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::vector<Arm>& arms) {
  cfg.validate();
  const auto sys = make_system(cfg.system);
  const bool serial = cfg.serial_timing;
  RunResult run;
  run.seed = seed;

  Rng ic_rng(derive_seed(seed, kInitialConditionStream));
  run.z0 = sample_initial_conditions(*sys, ic_rng);

  ReferenceTrajectory ref;
  try {
    ref = rk4_integrate(*sys, run.z0, cfg.T, default_reference_step(cfg.T));
  } catch (const std::exception& e) {
    run.error = std::string("reference: ") + e.what();
    return run;
  }
  run.metric_times = uniform_grid(cfg.T, kMetricSamples - 1);
  run.reference.reserve(run.metric_times.size());
  for (double t : run.metric_times) run.reference.push_back(ref.state_at(t));

  // Shared phase: K iterations of standard training.
  SolverState primary = make_solver(run.z0, cfg.solver_config(), derive_seed(seed, kPrimaryInitStream));
  Rng batches(derive_seed(seed, kPrimaryBatchStream));
  double primary_seconds = 0.0;
  try {
    TimingGuard guard(serial);
    Stopwatch sw;
    for (std::uint64_t i = 0; i < cfg.K; ++i) run.primary_loss = train_step(primary, *sys, batches);
    primary_seconds = sw.seconds();
  } catch (const std::exception& e) {
    run.error = std::string("primary training: ") + e.what();
    return run;
  }
  run.primary_ok = true;
  run.checkpoint = primary;

  auto predict_primary = [&primary](double t) { return predict(primary, t).value; };
  const ErrorMetrics primary_err = external_error(predict_primary, ref, run.metric_times);
  run.primary_dz_avg = primary_err.dz_avg;
  run.primary_dz_max = primary_err.dz_max;
  {
    std::size_t argmax = 0;
    for (std::size_t n = 0; n < primary_err.dz.size(); ++n)
      if (norm(primary_err.dz[n]) >= norm(primary_err.dz[argmax])) argmax = n;
    run.bound_boundary_max = argmax + 1 == primary_err.dz.size();
  }

  // Error prediction on the kM + 1 grid; shared by the correction arms.
  std::optional<ErrorDataset> dataset;
  double dataset_seconds = 0.0;
  std::string dataset_error;
  try {
    TimingGuard guard(serial);
    Stopwatch sw;
    dataset = generate_correction_dataset(primary, *sys, cfg.k, cfg.order);
    dataset_seconds = sw.seconds();
  } catch (const std::exception& e) {
    dataset_error = std::string("error dataset: ") + e.what();
  }
  if (dataset) {
    run.error_times = dataset->times;
    run.dz_internal = dataset->dz_ec;
    double total = 0.0, max_ext = 0.0;
    run.dz_external.reserve(dataset->size());
    for (std::size_t n = 0; n < dataset->size(); ++n) {
      Vec ext = sub(ref.state_at(dataset->times[n]), dataset->zhat[n]);
      total += norm(sub(dataset->dz_ec[n], ext));
      max_ext = std::max(max_ext, norm(ext));
      run.dz_external.push_back(std::move(ext));
    }
    const double mean_gap = total / static_cast<double>(dataset->size());
    run.discrepancy = max_ext > 0.0 ? mean_gap / max_ext : (mean_gap == 0.0 ? 0.0 : INFINITY);
    try {
      run.bound = estimate_bound(*dataset, *sys);
    } catch (const BoundUndefined&) {
      run.bound.reset();
    }
  }

  const std::uint64_t uses = std::max<std::uint64_t>(cfg.extra_iters, 1);
  for (Arm arm : arms) {
    ArmResult r;
    r.arm = arm;
    r.metrics = base_report(cfg, arm, seed);
    if (run.bound) {
      r.metrics.bound = run.bound->bound;
      r.metrics.l_max = run.bound->l_max;
      r.metrics.sigma_min = run.bound->sigma_min;
    } else {
      r.metrics.bound = std::numeric_limits<double>::quiet_NaN();
    }
    try {
      if (arm == Arm::standard) {
        SolverState s = primary;
        Rng rng = batches;
        PhaseTimings timing;
        {
          TimingGuard guard(serial);
          Stopwatch sw;
          for (std::uint64_t i = 0; i < cfg.extra_iters; ++i) r.final_loss = train_step(s, *sys, rng);
          timing.training_seconds = sw.seconds();
        }
        timing.iterations = cfg.extra_iters;
        if (cfg.extra_iters == 0) {
          timing.training_seconds = primary_seconds;
          timing.iterations = cfg.K;
          r.final_loss = run.primary_loss;
        }
        r.metrics.tau = runtime_meter(timing);
        const ErrorMetrics err = external_error([&s](double t) { return predict(s, t).value; }, ref,
                                                run.metric_times);
        r.metrics.dz_avg = err.dz_avg;
        r.metrics.dz_max = err.dz_max;
        fill_trajectory(r, run, err);
      } else {
        if (!dataset) throw std::runtime_error(dataset_error);
        const CorrectionMode mode = arm == Arm::alg1 ? CorrectionMode::regression : CorrectionMode::residual;
        CorrectionState c = make_correction(primary, *dataset, mode, derive_seed(seed, kCorrectionInitStream),
                                            cfg.order, cfg.scale_correction);
        Rng rng(derive_seed(seed, kCorrectionBatchStream));
        PhaseTimings timing;
        timing.setup_seconds = dataset_seconds;
        {
          TimingGuard guard(serial);
          Stopwatch sw;
          for (std::uint64_t i = 0; i < cfg.extra_iters; ++i)
            r.final_loss = mode == CorrectionMode::regression ? regression_train_step(c, rng)
                                                              : appendix_train_step(c, *sys, rng);
          timing.training_seconds = sw.seconds();
        }
        timing.iterations = uses;
        r.metrics.tau = runtime_meter(timing);
        const ErrorMetrics err = external_error(
            [&primary, &c](double t) { return corrected_prediction(primary, c, t); }, ref, run.metric_times);
        r.metrics.dz_avg = err.dz_avg;
        r.metrics.dz_max = err.dz_max;
        fill_trajectory(r, run, err);
      }
      r.ok = std::isfinite(r.metrics.dz_avg) && std::isfinite(r.metrics.dz_max);
      if (!r.ok) r.error = "non-finite error metrics";
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    run.arms.push_back(std::move(r));
  }
  return run;
}

MetricsReport run_arm(const ExperimentConfig& cfg, Arm arm, std::uint64_t seed) {
  const RunResult run = run_seed(cfg, seed, {arm});
  if (!run.primary_ok) throw std::runtime_error(std::string(to_string(arm)) + " seed " + std::to_string(seed) + ": " + run.error);
  const ArmResult& r = run.arms.front();
  if (!r.ok) throw std::runtime_error(std::string(to_string(arm)) + " seed " + std::to_string(seed) + ": " + r.error);
  return r.metrics;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

StudyReport run_study(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyReport report;
  report.config = cfg;
  report.runs.resize(cfg.runs);

  auto work = [&](std::size_t i) { report.runs[i] = run_seed(cfg, cfg.seed + i, cfg.arms); };
  if (cfg.parallel && cfg.runs > 1) {
    const std::size_t workers = std::min<std::size_t>(cfg.runs, std::max(1u, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cfg.runs; i = next++) work(i);
      });
  } else {
    for (std::size_t i = 0; i < cfg.runs; ++i) work(i);
  }

  for (Arm arm : cfg.arms) {
    ArmSummary s;
    s.arm = arm;
    std::vector<double> tau, avg, mx;
    for (const RunResult& run : report.runs) {
      const ArmResult* r = run.arm(arm);
      if (r && r->ok) {
        ++s.completed;
        tau.push_back(r->metrics.tau);
        avg.push_back(r->metrics.dz_avg);
        mx.push_back(r->metrics.dz_max);
      } else {
        ++s.failed;
      }
    }
    s.median_tau = median(tau);
    s.median_dz_avg = median(avg);
    s.median_dz_max = median(mx);
    report.summaries.push_back(s);
  }
  return report;
}

void write_study_csv(std::ostream& out, const StudyReport& report) {
  CsvWriter csv(out);
  const std::vector<std::string> header{"arm", "seed", "tau", "dz_avg", "dz_max", "bound", "discrepancy"};
  csv.header(header);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const RunResult& run : report.runs) {
    for (Arm arm : report.config.arms) {
      const ArmResult* r = run.arm(arm);
      const std::vector<std::string> labels{std::string(to_string(arm)), std::to_string(run.seed)};
      if (r && r->ok) {
        const std::vector<double> v{r->metrics.tau, r->metrics.dz_avg, r->metrics.dz_max, r->metrics.bound,
                                    run.discrepancy};
        csv.row(labels, v);
      } else {
        const std::vector<double> v{nan, nan, nan, run.bound ? run.bound->bound : nan,
                                    run.dz_internal.empty() ? nan : run.discrepancy};
        csv.row(labels, v);
      }
    }
  }
}

void write_summary_csv(std::ostream& out, const StudyReport& report) {
  CsvWriter csv(out);
  const std::vector<std::string> header{"arm", "completed", "failed", "median_tau", "median_dz_avg",
                                        "median_dz_max"};
  csv.header(header);
  for (const ArmSummary& s : report.summaries) {
    const std::vector<std::string> labels{std::string(to_string(s.arm)), std::to_string(s.completed),
                                          std::to_string(s.failed)};
    const std::vector<double> v{s.median_tau, s.median_dz_avg, s.median_dz_max};
    csv.row(labels, v);
  }
}

void write_bounds_csv(std::ostream& out, const StudyReport& report) {
  CsvWriter csv(out);
  const std::vector<std::string> header{"seed",           "l_max",          "sigma_min",       "bound",
                                        "primary_dz_avg", "primary_dz_max", "max_at_boundary", "discrepancy"};
  csv.header(header);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const RunResult& run : report.runs) {
    const std::vector<std::string> labels{std::to_string(run.seed)};
    const bool primary = run.primary_ok;
    const std::vector<double> v{run.bound ? run.bound->l_max : nan,
                                run.bound ? run.bound->sigma_min : nan,
                                run.bound ? run.bound->bound : nan,
                                primary ? run.primary_dz_avg : nan,
                                primary ? run.primary_dz_max : nan,
                                primary ? (run.bound_boundary_max ? 1.0 : 0.0) : nan,
                                run.dz_internal.empty() ? nan : run.discrepancy};
    csv.row(labels, v);
  }
}

void write_errors_csv(std::ostream& out, const RunResult& run) {
  const std::size_t dim = run.z0.size();
  std::vector<std::string> header{"t"};
  for (const char* prefix : {"dz_internal_", "dz_external_"})
    for (std::size_t d = 1; d <= dim; ++d) header.push_back(prefix + std::to_string(d));
  CsvWriter csv(out);
  csv.header(header);
  std::vector<double> row;
  for (std::size_t n = 0; n < run.error_times.size(); ++n) {
    row.assign(1, run.error_times[n]);
    row.insert(row.end(), run.dz_internal[n].begin(), run.dz_internal[n].end());
    row.insert(row.end(), run.dz_external[n].begin(), run.dz_external[n].end());
    csv.row(row);
  }
}

void write_run_trajectory_csv(std::ostream& out, const RunResult& run) {
  const std::size_t dim = run.z0.size();
  std::vector<std::string> header{"t"};
  for (std::size_t d = 1; d <= dim; ++d) header.push_back("z_" + std::to_string(d));
  std::vector<const ArmResult*> arms;
  for (const ArmResult& r : run.arms) {
    if (!r.ok) continue;
    arms.push_back(&r);
    for (std::size_t d = 1; d <= dim; ++d) header.push_back(std::string(to_string(r.arm)) + "_" + std::to_string(d));
  }
  CsvWriter csv(out);
  csv.header(header);
  std::vector<double> row;
  for (std::size_t n = 0; n < run.metric_times.size(); ++n) {
    row.assign(1, run.metric_times[n]);
    row.insert(row.end(), run.reference[n].begin(), run.reference[n].end());
    for (const ArmResult* r : arms) row.insert(row.end(), r->trajectory[n].begin(), r->trajectory[n].end());
    csv.row(row);
  }
}

void write_study_outputs(const std::filesystem::path& dir, const StudyReport& report) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("study.csv");
    write_study_csv(f, report);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, report);
  }
  {
    auto f = open("bounds.csv");
    write_bounds_csv(f, report);
  }
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunResult& run = report.runs[i];
    if (!run.primary_ok) continue;
    {
      auto f = open("trajectory_" + std::to_string(i) + ".csv");
      write_run_trajectory_csv(f, run);
    }
    if (!run.error_times.empty()) {
      auto f = open("errors_" + std::to_string(i) + ".csv");
      write_errors_csv(f, run);
    }
  }
}

}  // namespace nnde
