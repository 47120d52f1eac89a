#include "nnde/solver.hpp"

#include <algorithm>
#include <cmath>

namespace nnde {

void SolverState::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("solver: T must be positive");
  if (batch < 2) throw std::invalid_argument("solver: M must be >= 2");
  if (!all_finite(z0)) throw std::invalid_argument("solver: z0 must be finite");
  if (z0.size() != net.out_dim()) throw std::invalid_argument("solver: z0 size differs from network output");
}

SolverState make_solver(std::span<const double> z0, const SolverConfig& config, std::uint64_t seed) {
  SolverState s;
  s.net = init_params(seed, config.width, z0.size());
  s.z0.assign(z0.begin(), z0.end());
  s.horizon = config.horizon;
  s.batch = config.batch;
  s.adam = config.adam;
  s.validate();
  return s;
}

Prediction predict(const SolverState& s, double t) {
  const NetEval n = forward(s.net, t);
  const double decay = std::exp(-t);
  const double phi = 1.0 - decay;
  Prediction p;
  p.value.resize(s.z0.size());
  p.time_derivative.resize(s.z0.size());
  for (std::size_t d = 0; d < s.z0.size(); ++d) {
    p.value[d] = s.z0[d] + phi * n.value[d];
    p.time_derivative[d] = decay * n.value[d] + phi * n.time_derivative[d];
  }
  return p;
}

ResidualSample residual(const SolverState& s, const DynamicalSystem& sys, double t) {
  Prediction p = predict(s, t);
  const Vec f = flow(sys, p.value);
  return {t, sub(p.time_derivative, f), std::move(p.value)};
}

std::vector<ResidualSample> residual_grid(const SolverState& s, const DynamicalSystem& sys,
                                          std::span<const double> times) {
  std::vector<ResidualSample> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(residual(s, sys, t));
  return out;
}

std::vector<double> sample_times(std::size_t batch, double horizon, Rng& rng) {
  if (batch < 2) throw std::invalid_argument("sample_times: M must be >= 2");
  std::uniform_real_distribution<double> uniform(0.0, horizon);
  std::vector<double> times(batch + 1);
  times.front() = 0.0;
  times.back() = horizon;
  for (std::size_t n = 1; n < batch; ++n) {
    double t = uniform(rng);
    while (t <= 0.0) t = uniform(rng);  // open interval
    times[n] = t;
  }
  std::sort(times.begin() + 1, times.end() - 1);
  return times;
}

double residual_loss(const SolverState& s, const DynamicalSystem& sys, std::span<const double> times,
                     NetworkParams* grad) {
  const std::size_t dim = s.z0.size();
  const double norm_factor = 1.0 / static_cast<double>(times.size() * dim);

  auto loss = [&](std::span<const NetEval> evals, std::span<NetEval> adjoints) {
    double total = 0.0;
    Vec zhat(dim), ell(dim), g(dim);
    for (std::size_t n = 0; n < evals.size(); ++n) {
      const double decay = std::exp(-times[n]);
      const double phi = 1.0 - decay;
      const NetEval& e = evals[n];
      for (std::size_t d = 0; d < dim; ++d) zhat[d] = s.z0[d] + phi * e.value[d];
      const Vec f = flow(sys, zhat);
      for (std::size_t d = 0; d < dim; ++d) {
        ell[d] = decay * e.value[d] + phi * e.time_derivative[d] - f[d];
        total += ell[d] * ell[d];
        g[d] = 2.0 * norm_factor * ell[d];
      }
      // dL/dz_hat = -F_z^T g, and z_hat, dz_hat/dt both depend on N
      const Matrix fz = flow_jacobian(sys, zhat);
      for (std::size_t j = 0; j < dim; ++j) {
        double back = 0.0;
        for (std::size_t i = 0; i < dim; ++i) back += fz(i, j) * g[i];
        adjoints[n].value[j] = decay * g[j] - phi * back;
        adjoints[n].time_derivative[j] = phi * g[j];
      }
    }
    return total * norm_factor;
  };

  NetworkParams scratch;
  NetworkParams& out = grad ? *grad : scratch;
  return loss_gradient(s.net, times, loss, out, Pass::with_time_derivative);
}

double train_step(SolverState& s, const DynamicalSystem& sys, Rng& rng) {
  const std::vector<double> times = sample_times(s.batch, s.horizon, rng);
  NetworkParams grad;
  double loss = 0.0;
  try {
    loss = residual_loss(s, sys, times, &grad);
  } catch (const DivergenceError& e) {
    throw TrainingDivergence(std::string("solver training diverged: ") + e.what(), s.iteration);
  }
  if (!std::isfinite(loss) || loss > kDivergenceLoss)
    throw TrainingDivergence("solver training diverged: loss " + std::to_string(loss), s.iteration);
  sgd_step(s.net, grad, s.optimizer, s.adam);
  ++s.iteration;
  return loss;
}

}  // namespace nnde
