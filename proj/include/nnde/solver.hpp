#ifndef NNDE_SOLVER_HPP
#define NNDE_SOLVER_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnde/diffnet.hpp"
#include "nnde/linalg.hpp"
#include "nnde/random.hpp"
#include "nnde/systems.hpp"

namespace nnde {

struct SolverConfig {
  double horizon = 10.0;    // T
  std::size_t batch = 100;  // M; each batch holds M + 1 times
  std::size_t width = 32;
  AdamConfig adam;
};

/// The unsupervised solver: a network N and the prediction
///   z_hat(t) = z0 + (1 - exp(-t)) N(t),
/// which meets the initial condition exactly.
struct SolverState {
  NetworkParams net;
  Vec z0;
  double horizon = 10.0;
  std::size_t batch = 100;
  std::uint64_t iteration = 0;
  AdamState optimizer;
  AdamConfig adam;

  /// Throws std::invalid_argument unless T > 0, M >= 2, z0 is finite and
  /// its size matches the network output.
  void validate() const;
};

SolverState make_solver(std::span<const double> z0, const SolverConfig& config, std::uint64_t seed);

/// Raised by training steps whose loss is non-finite or above the guard.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, std::uint64_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

inline constexpr double kDivergenceLoss = 1e6;

struct Prediction {
  Vec value;
  Vec time_derivative;
};

Prediction predict(const SolverState& s, double t);

struct ResidualSample {
  double t = 0.0;
  Vec ell;   // d z_hat/dt - F(z_hat)
  Vec zhat;
};

ResidualSample residual(const SolverState& s, const DynamicalSystem& sys, double t);
std::vector<ResidualSample> residual_grid(const SolverState& s, const DynamicalSystem& sys,
                                          std::span<const double> times);

/// {0, M-1 sorted uniform draws on (0, T), T}.
std::vector<double> sample_times(std::size_t batch, double horizon, Rng& rng);

/// Mean of ell . ell over the batch points and the D components.
double residual_loss(const SolverState& s, const DynamicalSystem& sys, std::span<const double> times,
                     NetworkParams* grad = nullptr);

/// One Adam step on the residual loss over a fresh batch. Returns the
/// loss before the step.
double train_step(SolverState& s, const DynamicalSystem& sys, Rng& rng);

}  // namespace nnde

#endif  // NNDE_SOLVER_HPP
