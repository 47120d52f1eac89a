#include "nnde/reference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nnde/csv.hpp"

namespace nnde {

Vec ReferenceTrajectory::state_at(double t) const {
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double t0 = times[lo];
  const double h = times[hi] - t0;
  const double s = (t - t0) / h;
  if (s == 0.0) return states[lo];
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  Vec out(states[lo].size());
  for (std::size_t d = 0; d < out.size(); ++d)
    out[d] = h00 * states[lo][d] + h10 * h * rates[lo][d] + h01 * states[hi][d] + h11 * h * rates[hi][d];
  return out;
}

ReferenceTrajectory rk4_integrate(const DynamicalSystem& sys, std::span<const double> z0,
                                  double horizon, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("rk4_integrate: step must be positive");
  if (!(horizon / h >= 1.0)) throw std::invalid_argument("rk4_integrate: need T/h >= 1");
  if (z0.size() != sys.dimension()) throw std::invalid_argument("rk4_integrate: dimension mismatch");

  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h - 1e-9));
  const std::size_t dim = z0.size();
  ReferenceTrajectory ref;
  ref.step = h;
  ref.times.reserve(steps + 1);
  ref.states.reserve(steps + 1);
  ref.rates.reserve(steps + 1);

  Vec z(z0.begin(), z0.end());
  Vec tmp(dim);
  double t = 0.0;
  ref.times.push_back(t);
  ref.states.push_back(z);
  ref.rates.push_back(flow(sys, z));
  for (std::size_t n = 0; n < steps; ++n) {
    const double dt = (n + 1 == steps) ? horizon - t : h;
    const Vec& k1 = ref.rates.back();
    for (std::size_t d = 0; d < dim; ++d) tmp[d] = z[d] + 0.5 * dt * k1[d];
    const Vec k2 = flow(sys, tmp);
    for (std::size_t d = 0; d < dim; ++d) tmp[d] = z[d] + 0.5 * dt * k2[d];
    const Vec k3 = flow(sys, tmp);
    for (std::size_t d = 0; d < dim; ++d) tmp[d] = z[d] + dt * k3[d];
    const Vec k4 = flow(sys, tmp);
    for (std::size_t d = 0; d < dim; ++d) z[d] += dt / 6.0 * (k1[d] + 2.0 * (k2[d] + k3[d]) + k4[d]);
    t = (n + 1 == steps) ? horizon : static_cast<double>(n + 1) * h;
    if (!all_finite(z)) throw IntegrationFailure("reference integration failed at t=" + std::to_string(t), t);
    ref.times.push_back(t);
    ref.states.push_back(z);
    ref.rates.push_back(flow(sys, z));
  }
  return ref;
}

void write_trajectory_csv(std::ostream& out, const ReferenceTrajectory& ref, std::size_t stride) {
  std::vector<std::string> header{"t"};
  for (std::size_t d = 1; d <= ref.states.front().size(); ++d) header.push_back("z_" + std::to_string(d));
  CsvWriter csv(out);
  csv.header(header);
  std::vector<double> row;
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t n = 0; n < ref.times.size(); n += stride) {
    row.assign(1, ref.times[n]);
    row.insert(row.end(), ref.states[n].begin(), ref.states[n].end());
    csv.row(row);
  }
}

ErrorMetrics external_error(const Predictor& predictor, const ReferenceTrajectory& ref,
                            std::size_t samples) {
  if (samples < 2) throw std::invalid_argument("external_error: need at least two samples");
  std::vector<double> times(samples);
  const double horizon = ref.horizon();
  for (std::size_t n = 0; n < samples; ++n)
    times[n] = horizon * static_cast<double>(n) / static_cast<double>(samples - 1);
  times.back() = horizon;
  return external_error(predictor, ref, times);
}

ErrorMetrics external_error(const Predictor& predictor, const ReferenceTrajectory& ref,
                            std::span<const double> times) {
  ErrorMetrics m;
  m.times.assign(times.begin(), times.end());
  m.dz.reserve(times.size());
  double total = 0.0;
  for (double t : times) {
    Vec dz = sub(ref.state_at(t), predictor(t));
    const double mag = norm(dz);
    total += mag;
    m.dz_max = std::max(m.dz_max, mag);
    m.dz.push_back(std::move(dz));
  }
  m.dz_avg = times.empty() ? 0.0 : total / static_cast<double>(times.size());
  return m;
}

double runtime_meter(const PhaseTimings& timings) {
  if (timings.iterations == 0) throw std::invalid_argument("runtime_meter: iterations must be > 0");
  return (timings.setup_seconds + timings.training_seconds) / static_cast<double>(timings.iterations);
}

}  // namespace nnde
