#include "nnde/correction.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace nnde {

std::string_view to_string(CorrectionMode mode) {
  return mode == CorrectionMode::regression ? "regression" : "residual";
}

CorrectionMode parse_correction_mode(std::string_view text) {
  if (text == "regression") return CorrectionMode::regression;
  if (text == "residual") return CorrectionMode::residual;
  throw std::invalid_argument("unknown correction mode '" + std::string(text) + "'");
}

Vec dataset_output_scale(const ErrorDataset& data) {
  Vec scale(data.dimension(), 0.0);
  for (const Vec& dz : data.dz_ec)
    for (std::size_t d = 0; d < scale.size(); ++d) scale[d] = std::max(scale[d], std::abs(dz[d]));
  for (double& s : scale)
    if (!(s > 0.0) || !std::isfinite(s)) s = 1.0;
  return scale;
}

CorrectionState make_correction(const SolverState& primary, ErrorDataset dataset, CorrectionMode mode,
                                std::uint64_t seed, int order, bool scale_output) {
  if (dataset.dimension() != primary.z0.size())
    throw std::invalid_argument("make_correction: dataset dimension differs from solver");
  CorrectionState c;
  c.net2 = init_params(seed, primary.net.width(), primary.net.out_dim());
  c.output_scale = scale_output ? dataset_output_scale(dataset) : Vec(dataset.dimension(), 1.0);
  c.dataset = std::move(dataset);
  c.batch = primary.batch;
  c.adam = primary.adam;
  c.mode = mode;
  c.order = order;
  return c;
}

Prediction predict_correction(const CorrectionState& c, double t) {
  const NetEval n = forward(c.net2, t);
  const double decay = std::exp(-t);
  const double phi = 1.0 - decay;
  Prediction p{Vec(n.value.size()), Vec(n.value.size())};
  for (std::size_t d = 0; d < n.value.size(); ++d) {
    const double s = c.output_scale[d];
    p.value[d] = s * phi * n.value[d];
    p.time_derivative[d] = s * (decay * n.value[d] + phi * n.time_derivative[d]);
  }
  return p;
}

Vec corrected_prediction(const SolverState& s, const CorrectionState& c, double t) {
  const Vec n1 = forward_value(s.net, t);
  const Vec n2 = forward_value(c.net2, t);
  const double phi = 1.0 - std::exp(-t);
  Vec z(s.z0.size());
  for (std::size_t d = 0; d < z.size(); ++d) z[d] = s.z0[d] + phi * (n1[d] + c.output_scale[d] * n2[d]);
  return z;
}

std::vector<std::size_t> assemble_batch(const ErrorDataset& data, std::size_t batch, Rng& rng) {
  if (batch < 2) throw std::invalid_argument("assemble_batch: M must be >= 2");
  const std::size_t rows = data.size();
  if (rows < batch + 1)
    throw DatasetTooSmall("assemble_batch: dataset has " + std::to_string(rows) + " rows, need " +
                          std::to_string(batch + 1));
  const std::size_t interior = rows - 2;
  const std::size_t draws = batch - 1;

  std::vector<std::size_t> out;
  out.reserve(batch + 1);
  out.push_back(0);
  // Floyd's algorithm: `draws` distinct values from [1, interior]
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(draws * 2);
  for (std::size_t j = interior - draws + 1; j <= interior; ++j) {
    std::uniform_int_distribution<std::size_t> pick(1, j);
    const std::size_t r = pick(rng);
    const std::size_t v = chosen.insert(r).second ? r : j;
    if (v == j) chosen.insert(j);
    out.push_back(v);
  }
  std::sort(out.begin() + 1, out.end());
  out.push_back(rows - 1);
  return out;
}

namespace {

std::vector<double> times_of(const ErrorDataset& data, std::span<const std::size_t> rows) {
  std::vector<double> t;
  t.reserve(rows.size());
  for (std::size_t r : rows) t.push_back(data.times[r]);
  return t;
}

}  // namespace

double regression_loss(const CorrectionState& c, std::span<const std::size_t> rows, NetworkParams* grad) {
  const std::vector<double> times = times_of(c.dataset, rows);
  const std::size_t dim = c.net2.out_dim();
  const double norm_factor = 1.0 / static_cast<double>(rows.size() * dim);

  auto loss = [&](std::span<const NetEval> evals, std::span<NetEval> adjoints) {
    double total = 0.0;
    for (std::size_t n = 0; n < evals.size(); ++n) {
      const double phi = 1.0 - std::exp(-times[n]);
      const Vec& target = c.dataset.dz_ec[rows[n]];
      for (std::size_t d = 0; d < dim; ++d) {
        const double s = c.output_scale[d];
        const double ell2 = target[d] - s * phi * evals[n].value[d];
        total += ell2 * ell2;
        adjoints[n].value[d] = -2.0 * norm_factor * s * phi * ell2;
      }
    }
    return total * norm_factor;
  };

  NetworkParams scratch;
  return loss_gradient(c.net2, times, loss, grad ? *grad : scratch, Pass::value_only);
}

double regression_train_step(CorrectionState& c, Rng& rng) {
  if (c.mode != CorrectionMode::regression)
    throw std::logic_error("regression_train_step requires regression mode");
  const std::vector<std::size_t> rows = assemble_batch(c.dataset, c.batch, rng);
  NetworkParams grad;
  double loss = 0.0;
  try {
    loss = regression_loss(c, rows, &grad);
  } catch (const DivergenceError& e) {
    throw TrainingDivergence(std::string("correction training diverged: ") + e.what(), c.iteration);
  }
  if (!std::isfinite(loss) || loss > kDivergenceLoss)
    throw TrainingDivergence("correction training diverged: loss " + std::to_string(loss), c.iteration);
  sgd_step(c.net2, grad, c.optimizer, c.adam);
  ++c.iteration;
  return loss;
}

std::size_t grid_index(const ErrorDataset& data, double t) {
  if (data.size() < 2) throw OffGridTime("grid_index: empty dataset");
  const double pos = t / data.dt;
  const double rounded = std::round(pos);
  if (rounded < 0.0 || rounded > static_cast<double>(data.size() - 1))
    throw OffGridTime("time " + std::to_string(t) + " is outside the stored grid");
  const auto idx = static_cast<std::size_t>(rounded);
  if (std::abs(data.times[idx] - t) > 1e-9 * std::max(1.0, data.horizon()))
    throw OffGridTime("time " + std::to_string(t) +
                      " is not a stored grid point; interpolation is not allowed");
  return idx;
}

namespace {

// ell2 and, if requested, dL/d(dz_hat) factor (F_z + F_zz dz_hat) at one row.
struct AppendixTerms {
  Vec ell2;
  Matrix linear;  // d(ell2)/d(dz_hat) = -(F_z + F_zz dz_hat) for the chosen order
};

AppendixTerms appendix_terms(const CorrectionState& c, const DynamicalSystem& sys, std::size_t row,
                             std::span<const double> dzhat, std::span<const double> dzhat_dot) {
  const Vec& z = c.dataset.zhat[row];
  const Vec& ell = c.dataset.ell[row];
  const std::size_t dim = ell.size();
  Matrix fz = flow_jacobian(sys, z);
  Vec model = matvec(fz, dzhat);
  Matrix lin = fz;
  if (c.order == 2) {
    const Tensor3 fzz = flow_second_derivative(sys, z);
    const Vec quad = contract(fzz, dzhat, dzhat);
    for (std::size_t i = 0; i < dim; ++i) {
      model[i] += 0.5 * quad[i];
      for (std::size_t j = 0; j < dim; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += fzz(i, j, k) * dzhat[k];
        lin(i, j) += s;  // F_zz symmetric in (j, k)
      }
    }
  }
  AppendixTerms out{Vec(dim), std::move(lin)};
  for (std::size_t i = 0; i < dim; ++i) out.ell2[i] = ell[i] - model[i] + dzhat_dot[i];
  return out;
}

}  // namespace

Vec appendix_residual(const CorrectionState& c, const DynamicalSystem& sys, double t) {
  const std::size_t row = grid_index(c.dataset, t);
  const Prediction p = predict_correction(c, c.dataset.times[row]);
  return appendix_terms(c, sys, row, p.value, p.time_derivative).ell2;
}

double appendix_loss(const CorrectionState& c, const DynamicalSystem& sys,
                     std::span<const std::size_t> rows, NetworkParams* grad) {
  const std::vector<double> times = times_of(c.dataset, rows);
  const std::size_t dim = c.net2.out_dim();
  const double norm_factor = 1.0 / static_cast<double>(rows.size() * dim);

  auto loss = [&](std::span<const NetEval> evals, std::span<NetEval> adjoints) {
    double total = 0.0;
    Vec dzhat(dim), dzhat_dot(dim), g(dim);
    for (std::size_t n = 0; n < evals.size(); ++n) {
      const double decay = std::exp(-times[n]);
      const double phi = 1.0 - decay;
      for (std::size_t d = 0; d < dim; ++d) {
        const double s = c.output_scale[d];
        dzhat[d] = s * phi * evals[n].value[d];
        dzhat_dot[d] = s * (decay * evals[n].value[d] + phi * evals[n].time_derivative[d]);
      }
      const AppendixTerms terms = appendix_terms(c, sys, rows[n], dzhat, dzhat_dot);
      for (std::size_t d = 0; d < dim; ++d) {
        total += terms.ell2[d] * terms.ell2[d];
        g[d] = 2.0 * norm_factor * terms.ell2[d];
      }
      for (std::size_t j = 0; j < dim; ++j) {
        double back = 0.0;
        for (std::size_t i = 0; i < dim; ++i) back += terms.linear(i, j) * g[i];
        // d(ell2)/d(dz_hat) = -linear, d(ell2)/d(dz_hat_dot) = I
        const double s = c.output_scale[j];
        adjoints[n].value[j] = s * (-phi * back + decay * g[j]);
        adjoints[n].time_derivative[j] = s * phi * g[j];
      }
    }
    return total * norm_factor;
  };

  NetworkParams scratch;
  return loss_gradient(c.net2, times, loss, grad ? *grad : scratch, Pass::with_time_derivative);
}

double appendix_train_step(CorrectionState& c, const DynamicalSystem& sys, Rng& rng) {
  if (c.mode != CorrectionMode::residual)
    throw std::logic_error("appendix_train_step requires residual mode");
  const std::vector<std::size_t> rows = assemble_batch(c.dataset, c.batch, rng);
  NetworkParams grad;
  double loss = 0.0;
  try {
    loss = appendix_loss(c, sys, rows, &grad);
  } catch (const DivergenceError& e) {
    throw TrainingDivergence(std::string("correction training diverged: ") + e.what(), c.iteration);
  }
  if (!std::isfinite(loss) || loss > kDivergenceLoss)
    throw TrainingDivergence("correction training diverged: loss " + std::to_string(loss), c.iteration);
  sgd_step(c.net2, grad, c.optimizer, c.adam);
  ++c.iteration;
  return loss;
}

}  // namespace nnde
