#ifndef NNDE_HARNESS_HPP
#define NNDE_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnde/errquant.hpp"
#include "nnde/reference.hpp"
#include "nnde/solver.hpp"
#include "nnde/systems.hpp"

namespace nnde {

enum class Arm { standard, alg1, appendix };

std::string_view to_string(Arm arm);
Arm parse_arm(std::string_view text);
/// Comma-separated arm list, e.g. "standard,alg1".
std::vector<Arm> parse_arms(std::string_view text);

// Independent random streams derived from a run seed with derive_seed.
enum SeedStream : std::uint64_t {
  kInitialConditionStream,
  kPrimaryInitStream,
  kPrimaryBatchStream,
  kCorrectionInitStream,
  kCorrectionBatchStream,
};

struct ExperimentConfig {
  std::string system = "nl-osc";
  std::size_t runs = 11;
  std::uint64_t seed = 1;          // run i uses seed + i
  std::uint64_t K = 2000;          // shared primary training
  std::uint64_t extra_iters = 3000;
  std::size_t k = 50;
  std::size_t M = 100;
  double T = 10.0;
  std::size_t width = 32;
  double lr = 3e-3;
  int order = 2;
  std::vector<Arm> arms{Arm::standard, Arm::alg1};
  bool scale_correction = true;
  bool parallel = false;
  bool serial_timing = false;

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;
  SolverConfig solver_config() const;
};

/// Sets one field from its CLI/config-file key ("K", "lr", "arms", ...).
void apply_config_entry(ExperimentConfig& cfg, std::string_view key, std::string_view value);
/// key=value lines; '#' starts a comment.
void load_config(ExperimentConfig& cfg, std::istream& in);

/// Initial conditions drawn as in the reference experiments:
///   nl-osc: x ~ U[0.3, 2.3], p ~ U[0, 2]
///   henon-heiles: x ~ U[-0.5, 0.5], y ~ U[-0.5, sqrt(3)(1 - |x|)],
///                 px ~ N(0.25, 0.1), py ~ N(0.10, 0.1)
/// Henon-Heiles draws are repeated until the orbit is bounded (energy below
/// the saddle and inside the triangle of the potential) unless
/// `bounded_only` is false.
Vec sample_initial_conditions(const DynamicalSystem& sys, Rng& rng, bool bounded_only = true);

/// Whether a Henon-Heiles state lies on a bounded orbit.
bool henon_heiles_bounded(std::span<const double> z);

struct ArmResult {
  Arm arm = Arm::standard;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  double final_loss = 0.0;  // last training loss of the arm
  std::vector<Vec> trajectory;  // prediction on the metric grid
};

/// Everything produced for one seed: shared primary phase and all arms.
struct RunResult {
  std::uint64_t seed = 0;
  Vec z0;
  bool primary_ok = false;
  std::string error;
  double primary_loss = 0.0;  // last loss of the shared K-phase
  double primary_dz_avg = 0.0;
  double primary_dz_max = 0.0;
  std::optional<BoundEstimate> bound;
  bool bound_boundary_max = false;  // empirical max |dz| sits at t = T
  double discrepancy = 0.0;  // mean |dz_ec - dz_ext| / max |dz_ext| on the dataset grid
  std::vector<double> error_times;
  std::vector<Vec> dz_internal;
  std::vector<Vec> dz_external;
  std::vector<double> metric_times;
  std::vector<Vec> reference;
  std::vector<ArmResult> arms;
  SolverState checkpoint;  // primary after K iterations

  const ArmResult* arm(Arm a) const;
};

/// Runs the shared K-iteration phase for `seed` and then every arm in
/// `arms` from copies of that checkpoint.
RunResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::vector<Arm>& arms);

/// A single arm for one seed.
MetricsReport run_arm(const ExperimentConfig& cfg, Arm arm, std::uint64_t seed);

struct ArmSummary {
  Arm arm = Arm::standard;
  std::size_t completed = 0;
  std::size_t failed = 0;
  double median_tau = 0.0;
  double median_dz_avg = 0.0;
  double median_dz_max = 0.0;
};

struct StudyReport {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::vector<ArmSummary> summaries;

  const ArmSummary* summary(Arm a) const;
};

/// Median of the values (mean of the middle pair for even counts). NaN for
/// an empty list.
double median(std::vector<double> values);

StudyReport run_study(const ExperimentConfig& cfg);

/// study.csv: arm,seed,tau,dz_avg,dz_max,bound,discrepancy
void write_study_csv(std::ostream& out, const StudyReport& report);
/// summary.csv: arm,completed,failed,median_tau,median_dz_avg,median_dz_max
void write_summary_csv(std::ostream& out, const StudyReport& report);
/// errors_<run>.csv: t,dz_internal_1..D,dz_external_1..D
void write_errors_csv(std::ostream& out, const RunResult& run);
/// One row per run: bound terms next to the primary's measured error after K.
void write_bounds_csv(std::ostream& out, const StudyReport& report);
/// trajectory_<run>.csv: t,z_1..D (reference) then <arm>_1..D per arm
void write_run_trajectory_csv(std::ostream& out, const RunResult& run);

/// Writes all of the above into `dir` (created if needed).
void write_study_outputs(const std::filesystem::path& dir, const StudyReport& report);

}  // namespace nnde

#endif  // NNDE_HARNESS_HPP
