#include "nnde/errquant.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "nnde/csv.hpp"

namespace nnde {

double ErrorDataset::l_max() const {
  double m = 0.0;
  for (const Vec& e : ell) m = std::max(m, norm(e));
  return m;
}

double error_bound(double l_max, double sigma_min) {
  if (!(sigma_min > 0.0))
    throw BoundUndefined("error bound undefined: flow Jacobian is singular on the trajectory");
  return l_max / sigma_min;
}

std::vector<double> uniform_grid(double horizon, std::size_t intervals) {
  std::vector<double> t(intervals + 1);
  const double dt = horizon / static_cast<double>(intervals);
  for (std::size_t n = 0; n <= intervals; ++n) t[n] = static_cast<double>(n) * dt;
  t.back() = horizon;
  return t;
}

ErrorDataset integrate_error(const DynamicalSystem& sys, std::span<const ResidualSample> samples,
                             int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("integrate_error: order must be 1 or 2");
  if (samples.size() < 2) throw std::invalid_argument("integrate_error: need at least two grid points");
  if (samples.front().t != 0.0) throw std::invalid_argument("integrate_error: grid must start at t=0");

  const std::size_t n_points = samples.size();
  const double horizon = samples.back().t;
  const double dt = horizon / static_cast<double>(n_points - 1);
  for (std::size_t n = 1; n < n_points; ++n) {
    const double step = samples[n].t - samples[n - 1].t;
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, horizon))
      throw std::invalid_argument("integrate_error: grid is not uniform");
  }

  const std::size_t dim = sys.dimension();
  ErrorDataset out;
  out.dt = dt;
  out.times.reserve(n_points);
  out.ell.reserve(n_points);
  out.zhat.reserve(n_points);
  out.dz_ec.reserve(n_points);
  for (const ResidualSample& s : samples) {
    out.times.push_back(s.t);
    out.ell.push_back(s.ell);
    out.zhat.push_back(s.zhat);
  }

  Vec dz(dim, 0.0);
  out.dz_ec.push_back(dz);
  for (std::size_t n = 0; n + 1 < n_points; ++n) {
    const double step = samples[n + 1].t - samples[n].t;
    const Vec& z = samples[n].zhat;
    Vec drift = matvec(flow_jacobian(sys, z), dz);
    if (order == 2) {
      const Vec quad = contract(flow_second_derivative(sys, z), dz, dz);
      for (std::size_t d = 0; d < dim; ++d) drift[d] += 0.5 * quad[d];
    }
    for (std::size_t d = 0; d < dim; ++d) dz[d] += step * (drift[d] - samples[n].ell[d]);
    if (!all_finite(dz))
      throw EstimatorBlowUp("error recursion became non-finite at grid index " + std::to_string(n + 1),
                            n + 1);
    out.dz_ec.push_back(dz);
  }
  return out;
}

ErrorDataset generate_correction_dataset(const SolverState& s, const DynamicalSystem& sys,
                                         std::size_t k, int order) {
  if (k < 2) throw std::invalid_argument("generate_correction_dataset: k must be >= 2");
  const std::vector<double> grid = uniform_grid(s.horizon, k * s.batch);
  const std::vector<ResidualSample> samples = residual_grid(s, sys, grid);
  ErrorDataset data = integrate_error(sys, samples, order);
  data.k = k;
  return data;
}

BoundEstimate estimate_bound(const ErrorDataset& data, const DynamicalSystem& sys) {
  BoundEstimate b;
  b.l_max = data.l_max();
  b.sigma_min = std::numeric_limits<double>::infinity();
  for (const Vec& z : data.zhat) b.sigma_min = std::min(b.sigma_min, min_singular_value(flow_jacobian(sys, z)));
  b.bound = error_bound(b.l_max, b.sigma_min);
  return b;
}

void write_dataset_csv(std::ostream& out, const ErrorDataset& data) {
  const std::size_t dim = data.dimension();
  std::vector<std::string> header{"t"};
  for (const char* prefix : {"ell_", "zhat_", "dzec_"})
    for (std::size_t d = 1; d <= dim; ++d) header.push_back(prefix + std::to_string(d));
  CsvWriter csv(out);
  csv.header(header);
  std::vector<double> row;
  for (std::size_t n = 0; n < data.size(); ++n) {
    row.clear();
    row.push_back(data.times[n]);
    row.insert(row.end(), data.ell[n].begin(), data.ell[n].end());
    row.insert(row.end(), data.zhat[n].begin(), data.zhat[n].end());
    row.insert(row.end(), data.dz_ec[n].begin(), data.dz_ec[n].end());
    csv.row(row);
  }
}

ErrorDataset read_dataset_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const std::size_t cols = table.header.size();
  if (cols < 4 || (cols - 1) % 3 != 0 || table.header[0] != "t")
    throw std::runtime_error("dataset csv: unexpected header");
  const std::size_t dim = (cols - 1) / 3;
  ErrorDataset data;
  for (const auto& r : table.rows) {
    data.times.push_back(r[0]);
    data.ell.emplace_back(r.begin() + 1, r.begin() + 1 + dim);
    data.zhat.emplace_back(r.begin() + 1 + dim, r.begin() + 1 + 2 * dim);
    data.dz_ec.emplace_back(r.begin() + 1 + 2 * dim, r.end());
  }
  if (data.size() >= 2) data.dt = data.horizon() / static_cast<double>(data.size() - 1);
  return data;
}

}  // namespace nnde
