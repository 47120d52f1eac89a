// Command-line front end: train, quantify, correct, study.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nnde/checkpoint.hpp"
#include "nnde/correction.hpp"
#include "nnde/csv.hpp"
#include "nnde/errquant.hpp"
#include "nnde/harness.hpp"
#include "nnde/random.hpp"
#include "nnde/reference.hpp"
#include "nnde/solver.hpp"
#include "nnde/systems.hpp"

namespace fs = std::filesystem;
using namespace nnde;

namespace {

struct Overrides {
  std::optional<std::string> config_file;
  std::vector<std::pair<std::string, std::optional<std::string>>> values;
  bool parallel = false;
  bool serial_timing = false;
  std::string out = "out";
  std::optional<std::string> checkpoint;
  std::optional<std::string> z0;
  std::string mode = "regression";
};

void add_common(CLI::App* app, Overrides& o) {
  o.values = {{"system", {}}, {"seed", {}},  {"runs", {}},  {"K", {}},  {"iters", {}}, {"k", {}},
              {"M", {}},      {"T", {}},     {"width", {}}, {"lr", {}}, {"order", {}}, {"arms", {}}};
  app->add_option("--config", o.config_file, "key=value configuration file; flags override it");
  for (auto& [key, value] : o.values) app->add_option("--" + key, value);
  app->add_flag("--parallel", o.parallel, "run seeds on separate threads");
  app->add_flag("--serial-timing", o.serial_timing, "never overlap timed phases");
  app->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg;
  if (o.config_file) {
    std::ifstream in(*o.config_file);
    if (!in) throw std::runtime_error("cannot open config file " + *o.config_file);
    load_config(cfg, in);
  }
  for (const auto& [key, value] : o.values)
    if (value) apply_config_entry(cfg, key, *value);
  if (o.parallel) cfg.parallel = true;
  if (o.serial_timing) cfg.serial_timing = true;
  cfg.validate();
  return cfg;
}

Vec parse_vector(const std::string& text) {
  Vec v;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    v.push_back(parse_double(text.substr(start, end - start)));
    start = end + 1;
  }
  return v;
}

Vec initial_state(const Overrides& o, const ExperimentConfig& cfg, const DynamicalSystem& sys) {
  if (o.z0) {
    Vec z0 = parse_vector(*o.z0);
    if (z0.size() != sys.dimension()) throw std::invalid_argument("--z0 has the wrong dimension");
    return z0;
  }
  Rng rng(derive_seed(cfg.seed, kInitialConditionStream));
  return sample_initial_conditions(sys, rng);
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

// Either restores the primary from --checkpoint or trains it from scratch.
SolverState obtain_primary(const Overrides& o, const ExperimentConfig& cfg, const DynamicalSystem& sys,
                           Rng& batches) {
  if (o.checkpoint) {
    std::ifstream in(*o.checkpoint);
    if (!in) throw std::runtime_error("cannot open checkpoint " + *o.checkpoint);
    const Checkpoint ckpt = read_checkpoint(in);
    if (auto it = ckpt.labels.find("system"); it != ckpt.labels.end() && it->second != sys.name())
      throw std::invalid_argument("checkpoint was trained on " + it->second);
    return load_solver(ckpt, ckpt.arrays.count("primary.W1") ? "primary." : "");
  }
  SolverState s = make_solver(initial_state(o, cfg, sys), cfg.solver_config(), derive_seed(cfg.seed, kPrimaryInitStream));
  double loss = 0.0;
  for (std::uint64_t i = 0; i < cfg.K; ++i) loss = train_step(s, sys, batches);
  std::cout << "trained " << cfg.K << " iterations, final loss " << format_double(loss) << "\n";
  return s;
}

void write_prediction(const fs::path& path, const ReferenceTrajectory& ref, const Predictor& f) {
  auto out = open_out(path);
  const ErrorMetrics m = external_error(f, ref, kMetricSamples);
  const std::size_t dim = ref.states.front().size();
  std::vector<std::string> header{"t"};
  for (std::size_t d = 1; d <= dim; ++d) header.push_back("z_" + std::to_string(d));
  for (std::size_t d = 1; d <= dim; ++d) header.push_back("zhat_" + std::to_string(d));
  CsvWriter csv(out);
  csv.header(header);
  std::vector<double> row;
  for (std::size_t n = 0; n < m.times.size(); ++n) {
    const Vec z = ref.state_at(m.times[n]);
    row.assign(1, m.times[n]);
    row.insert(row.end(), z.begin(), z.end());
    for (std::size_t d = 0; d < dim; ++d) row.push_back(z[d] - m.dz[n][d]);
    csv.row(row);
  }
  std::cout << "dz_avg " << format_double(m.dz_avg) << "  dz_max " << format_double(m.dz_max) << "\n";
}

int cmd_train(const Overrides& o) {
  const ExperimentConfig cfg = resolve(o);
  const auto sys = make_system(cfg.system);
  Rng batches(derive_seed(cfg.seed, kPrimaryBatchStream));
  const SolverState s = obtain_primary(o, cfg, *sys, batches);
  const fs::path dir(o.out);
  {
    Checkpoint ckpt;
    ckpt.labels["system"] = sys->name();
    store_solver(ckpt, s);
    auto f = open_out(dir / "checkpoint.txt");
    write_checkpoint(f, ckpt);
  }
  const ReferenceTrajectory ref = rk4_integrate(*sys, s.z0, s.horizon, default_reference_step(s.horizon));
  write_prediction(dir / "trajectory_0.csv", ref, [&s](double t) { return predict(s, t).value; });
  return 0;
}

int cmd_quantify(const Overrides& o) {
  const ExperimentConfig cfg = resolve(o);
  const auto sys = make_system(cfg.system);
  Rng batches(derive_seed(cfg.seed, kPrimaryBatchStream));
  const SolverState s = obtain_primary(o, cfg, *sys, batches);
  const ErrorDataset data = generate_correction_dataset(s, *sys, cfg.k, cfg.order);
  const fs::path dir(o.out);
  {
    auto f = open_out(dir / "dataset.csv");
    write_dataset_csv(f, data);
  }
  const ReferenceTrajectory ref = rk4_integrate(*sys, s.z0, s.horizon, default_reference_step(s.horizon));
  RunResult run;
  run.z0 = s.z0;
  run.error_times = data.times;
  run.dz_internal = data.dz_ec;
  for (std::size_t n = 0; n < data.size(); ++n) run.dz_external.push_back(sub(ref.state_at(data.times[n]), data.zhat[n]));
  {
    auto f = open_out(dir / "errors_0.csv");
    write_errors_csv(f, run);
  }
  try {
    const BoundEstimate b = estimate_bound(data, *sys);
    std::cout << "l_max " << format_double(b.l_max) << "  sigma_min " << format_double(b.sigma_min) << "  bound "
              << format_double(b.bound) << "\n";
  } catch (const BoundUndefined& e) {
    std::cout << "bound undefined: " << e.what() << "\n";
  }
  double ec_max = 0.0, ext_max = 0.0;
  for (const Vec& v : run.dz_internal) ec_max = std::max(ec_max, norm(v));
  for (const Vec& v : run.dz_external) ext_max = std::max(ext_max, norm(v));
  std::cout << "max |dz_ec| " << format_double(ec_max) << "  max |dz_external| " << format_double(ext_max) << "\n";
  return 0;
}

int cmd_correct(const Overrides& o) {
  const ExperimentConfig cfg = resolve(o);
  const auto sys = make_system(cfg.system);
  Rng batches(derive_seed(cfg.seed, kPrimaryBatchStream));
  const SolverState s = obtain_primary(o, cfg, *sys, batches);
  const CorrectionMode mode = parse_correction_mode(o.mode);
  CorrectionState c = make_correction(s, generate_correction_dataset(s, *sys, cfg.k, cfg.order), mode,
                                      derive_seed(cfg.seed, kCorrectionInitStream), cfg.order, cfg.scale_correction);
  Rng rng(derive_seed(cfg.seed, kCorrectionBatchStream));
  double loss = 0.0;
  for (std::uint64_t i = 0; i < cfg.extra_iters; ++i)
    loss = mode == CorrectionMode::regression ? regression_train_step(c, rng) : appendix_train_step(c, *sys, rng);
  std::cout << "correction (" << to_string(mode) << ") " << cfg.extra_iters << " iterations, final loss "
            << format_double(loss) << "\n";
  const fs::path dir(o.out);
  {
    Checkpoint ckpt = corrected_model_checkpoint(s, c, sys->name());
    auto f = open_out(dir / "corrected_checkpoint.txt");
    write_checkpoint(f, ckpt);
  }
  const ReferenceTrajectory ref = rk4_integrate(*sys, s.z0, s.horizon, default_reference_step(s.horizon));
  write_prediction(dir / "trajectory_0.csv", ref, [&](double t) { return corrected_prediction(s, c, t); });
  return 0;
}

int cmd_study(const Overrides& o) {
  const ExperimentConfig cfg = resolve(o);
  const StudyReport report = run_study(cfg);
  write_study_outputs(o.out, report);
  std::printf("%-10s %9s %7s %12s %12s %12s\n", "arm", "completed", "failed", "median_tau", "median_avg",
              "median_max");
  for (const ArmSummary& s : report.summaries)
    std::printf("%-10s %9zu %7zu %12.4e %12.4e %12.4e\n", std::string(to_string(s.arm)).c_str(), s.completed,
                s.failed, s.median_tau, s.median_dz_avg, s.median_dz_max);
  for (const RunResult& run : report.runs)
    if (!run.error.empty()) std::cerr << "seed " << run.seed << ": " << run.error << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network ODE solver with internal error estimation and correction"};
  app.require_subcommand(1);

  Overrides train_o, quantify_o, correct_o, study_o;
  auto* train = app.add_subcommand("train", "train a primary solver and export its trajectory");
  add_common(train, train_o);
  train->add_option("--z0", train_o.z0, "comma-separated initial state");

  auto* quantify = app.add_subcommand("quantify", "estimate the error trajectory and bound of a primary solver");
  add_common(quantify, quantify_o);
  quantify->add_option("--checkpoint", quantify_o.checkpoint, "primary checkpoint from `train`");
  quantify->add_option("--z0", quantify_o.z0, "comma-separated initial state");

  auto* correct = app.add_subcommand("correct", "train a correction network on the estimated error");
  add_common(correct, correct_o);
  correct->add_option("--checkpoint", correct_o.checkpoint, "primary checkpoint from `train`");
  correct->add_option("--z0", correct_o.z0, "comma-separated initial state");
  correct->add_option("--mode", correct_o.mode, "regression or residual")
      ->check(CLI::IsMember({"regression", "residual"}));

  auto* study = app.add_subcommand("study", "multi-seed comparison of the training arms");
  add_common(study, study_o);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_o);
    if (*quantify) return cmd_quantify(quantify_o);
    if (*correct) return cmd_correct(correct_o);
    return cmd_study(study_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
