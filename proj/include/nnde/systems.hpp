#ifndef NNDE_SYSTEMS_HPP
#define NNDE_SYSTEMS_HPP

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nnde/linalg.hpp"

namespace nnde {

/// A Hamiltonian system z' = J grad H(z) on an even-dimensional phase
/// space z = (q, p). Derivatives of H are analytic.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;

  virtual double hamiltonian(std::span<const double> z) const = 0;
  virtual Vec grad_h(std::span<const double> z) const = 0;
  virtual Matrix hess_h(std::span<const double> z) const = 0;
  virtual Tensor3 third_h(std::span<const double> z) const = 0;
};

/// H = (x^2 + p^2)/2 + x^4/4, z = (x, p).
class NonlinearOscillator final : public DynamicalSystem {
 public:
  std::string name() const override { return "nl-osc"; }
  std::size_t dimension() const override { return 2; }
  double hamiltonian(std::span<const double> z) const override;
  Vec grad_h(std::span<const double> z) const override;
  Matrix hess_h(std::span<const double> z) const override;
  Tensor3 third_h(std::span<const double> z) const override;
};

/// H = (x^2 + y^2 + px^2 + py^2)/2 + y (3x^2 - y^2)/3, z = (x, y, px, py).
class HenonHeiles final : public DynamicalSystem {
 public:
  std::string name() const override { return "henon-heiles"; }
  std::size_t dimension() const override { return 4; }
  double hamiltonian(std::span<const double> z) const override;
  Vec grad_h(std::span<const double> z) const override;
  Matrix hess_h(std::span<const double> z) const override;
  Tensor3 third_h(std::span<const double> z) const override;

  /// Energy of the saddle points; orbits at or above it may escape.
  static constexpr double escape_energy = 1.0 / 6.0;
};

/// Looks up a system by its CLI name ("nl-osc", "henon-heiles").
std::unique_ptr<DynamicalSystem> make_system(std::string_view name);

/// J = [[0, I], [-I, 0]] for dimension `dim` (even).
Matrix symplectic_form(std::size_t dim);

Vec flow(const DynamicalSystem& sys, std::span<const double> z);
Matrix flow_jacobian(const DynamicalSystem& sys, std::span<const double> z);
// F_zz(i, j, k) = d^2 F_i / dz_j dz_k
Tensor3 flow_second_derivative(const DynamicalSystem& sys, std::span<const double> z);

/// Smallest singular value of a square matrix from the eigenvalues of
/// m^T m: closed form for 2x2, cyclic Jacobi otherwise.
double min_singular_value(const Matrix& m);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
std::vector<double> symmetric_eigenvalues(Matrix a, double tol = 1e-12, int max_sweeps = 30);

}  // namespace nnde

#endif  // NNDE_SYSTEMS_HPP
