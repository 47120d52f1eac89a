#include "nnde/systems.hpp"

#include <algorithm>
#include <cmath>

namespace nnde {

namespace {

void check_dim(const DynamicalSystem& sys, std::span<const double> z) {
  if (z.size() != sys.dimension())
    throw std::invalid_argument(sys.name() + ": expected state of dimension " +
                                std::to_string(sys.dimension()) + ", got " +
                                std::to_string(z.size()));
}

}  // namespace

double NonlinearOscillator::hamiltonian(std::span<const double> z) const {
  check_dim(*this, z);
  const double x = z[0], p = z[1];
  return 0.5 * (x * x + p * p) + 0.25 * x * x * x * x;
}

Vec NonlinearOscillator::grad_h(std::span<const double> z) const {
  check_dim(*this, z);
  const double x = z[0];
  return {x + x * x * x, z[1]};
}

Matrix NonlinearOscillator::hess_h(std::span<const double> z) const {
  check_dim(*this, z);
  Matrix h(2, 2);
  h(0, 0) = 1.0 + 3.0 * z[0] * z[0];
  h(1, 1) = 1.0;
  return h;
}

Tensor3 NonlinearOscillator::third_h(std::span<const double> z) const {
  check_dim(*this, z);
  Tensor3 t(2);
  t(0, 0, 0) = 6.0 * z[0];
  return t;
}

double HenonHeiles::hamiltonian(std::span<const double> z) const {
  check_dim(*this, z);
  const double x = z[0], y = z[1], px = z[2], py = z[3];
  return 0.5 * (x * x + y * y + px * px + py * py) + y * (3.0 * x * x - y * y) / 3.0;
}

Vec HenonHeiles::grad_h(std::span<const double> z) const {
  check_dim(*this, z);
  const double x = z[0], y = z[1];
  return {x + 2.0 * x * y, y + x * x - y * y, z[2], z[3]};
}

Matrix HenonHeiles::hess_h(std::span<const double> z) const {
  check_dim(*this, z);
  const double x = z[0], y = z[1];
  Matrix h(4, 4);
  h(0, 0) = 1.0 + 2.0 * y;
  h(0, 1) = h(1, 0) = 2.0 * x;
  h(1, 1) = 1.0 - 2.0 * y;
  h(2, 2) = 1.0;
  h(3, 3) = 1.0;
  return h;
}

Tensor3 HenonHeiles::third_h(std::span<const double> z) const {
  check_dim(*this, z);
  Tensor3 t(4);
  // d^3/dx^2 dy of x^2 y is 2; d^3/dy^3 of -y^3/3 is -2
  t(0, 0, 1) = t(0, 1, 0) = t(1, 0, 0) = 2.0;
  t(1, 1, 1) = -2.0;
  return t;
}

std::unique_ptr<DynamicalSystem> make_system(std::string_view name) {
  if (name == "nl-osc") return std::make_unique<NonlinearOscillator>();
  if (name == "henon-heiles") return std::make_unique<HenonHeiles>();
  throw std::invalid_argument("unknown system '" + std::string(name) +
                              "' (expected nl-osc or henon-heiles)");
}

Matrix symplectic_form(std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("symplectic form needs an even dimension");
  const std::size_t n = dim / 2;
  Matrix j(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    j(i, n + i) = 1.0;
    j(n + i, i) = -1.0;
  }
  return j;
}

Vec flow(const DynamicalSystem& sys, std::span<const double> z) {
  const Vec g = sys.grad_h(z);
  const std::size_t n = g.size() / 2;
  Vec f(g.size());
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = g[n + i];
    f[n + i] = -g[i];
  }
  return f;
}

Matrix flow_jacobian(const DynamicalSystem& sys, std::span<const double> z) {
  const Matrix h = sys.hess_h(z);
  const std::size_t dim = h.rows();
  const std::size_t n = dim / 2;
  Matrix fz(dim, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      fz(i, j) = h(n + i, j);
      fz(n + i, j) = -h(i, j);
    }
  return fz;
}

Tensor3 flow_second_derivative(const DynamicalSystem& sys, std::span<const double> z) {
  const Tensor3 t = sys.third_h(z);
  const std::size_t dim = t.size();
  const std::size_t n = dim / 2;
  Tensor3 fzz(dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = 0; k < dim; ++k) {
        fzz(i, j, k) = t(n + i, j, k);
        fzz(n + i, j, k) = -t(i, j, k);
      }
  return fzz;
}

std::vector<double> symmetric_eigenvalues(Matrix a, double tol, int max_sweeps) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("symmetric_eigenvalues: matrix not square");
  double scale = 0.0;
  for (double x : a.data()) scale += x * x;
  scale = std::sqrt(scale);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double min_singular_value(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument("min_singular_value: matrix must be square and non-empty");
  if (!all_finite(m.data())) throw std::invalid_argument("min_singular_value: non-finite entries");

  const Matrix ata = m.transpose() * m;
  double lambda_min = 0.0;
  if (m.rows() == 1) {
    lambda_min = ata(0, 0);
  } else if (m.rows() == 2) {
    const double a = ata(0, 0), b = ata(0, 1), d = ata(1, 1);
    const double half_trace = 0.5 * (a + d);
    const double radius = std::hypot(0.5 * (a - d), b);
    lambda_min = half_trace - radius;
  } else {
    lambda_min = symmetric_eigenvalues(ata).front();
  }
  return std::sqrt(std::max(lambda_min, 0.0));
}

}  // namespace nnde
