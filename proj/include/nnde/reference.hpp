#ifndef NNDE_REFERENCE_HPP
#define NNDE_REFERENCE_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnde/linalg.hpp"
#include "nnde/systems.hpp"

namespace nnde {

/// Dense fixed-step RK4 solution. `rates` holds F(states[n]) so the
/// trajectory can be interpolated (cubic Hermite) between steps.
struct ReferenceTrajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> rates;
  double step = 0.0;

  double horizon() const { return times.back(); }
  Vec state_at(double t) const;
};

class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

/// Default reference step T / 1e5.
inline double default_reference_step(double horizon) { return horizon / 1e5; }

/// Classical RK4 with step h; the last step is shortened to land on T.
ReferenceTrajectory rk4_integrate(const DynamicalSystem& sys, std::span<const double> z0,
                                  double horizon, double h);

void write_trajectory_csv(std::ostream& out, const ReferenceTrajectory& ref, std::size_t stride = 1);

inline constexpr std::size_t kMetricSamples = 2001;

struct ErrorMetrics {
  double dz_avg = 0.0;
  double dz_max = 0.0;
  std::vector<double> times;
  std::vector<Vec> dz;  // reference - prediction
};

using Predictor = std::function<Vec(double)>;

/// dz(t) = z_ref(t) - predictor(t) on `samples` uniform points of [0, T];
/// dz_avg and dz_max are the mean and max of |dz|.
ErrorMetrics external_error(const Predictor& predictor, const ReferenceTrajectory& ref,
                            std::size_t samples = kMetricSamples);

/// Same, on an explicit list of times.
ErrorMetrics external_error(const Predictor& predictor, const ReferenceTrajectory& ref,
                            std::span<const double> times);

struct PhaseTimings {
  double setup_seconds = 0.0;
  double training_seconds = 0.0;
  std::uint64_t iterations = 0;
};

/// tau = (setup + training) / iterations.
double runtime_meter(const PhaseTimings& timings);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct MetricsReport {
  std::string system;
  std::string arm;
  std::uint64_t seed = 0;
  std::uint64_t primary_iterations = 0;  // K
  std::uint64_t iterations = 0;          // iterations of use after K
  double tau = 0.0;
  double dz_avg = 0.0;
  double dz_max = 0.0;
  double bound = 0.0;
  double l_max = 0.0;
  double sigma_min = 0.0;
};

}  // namespace nnde

#endif  // NNDE_REFERENCE_HPP
