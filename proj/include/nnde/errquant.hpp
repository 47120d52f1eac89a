#ifndef NNDE_ERRQUANT_HPP
#define NNDE_ERRQUANT_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnde/linalg.hpp"
#include "nnde/solver.hpp"
#include "nnde/systems.hpp"

namespace nnde {

/// Residuals and predictions of a frozen solver on a uniform grid, together
/// with the error trajectory recovered from them.
struct ErrorDataset {
  std::vector<double> times;  // uniform, times[0] = 0, times.back() = T
  std::vector<Vec> ell;
  std::vector<Vec> zhat;
  std::vector<Vec> dz_ec;
  double dt = 0.0;
  std::size_t k = 0;  // grid multiplier; 0 when built from raw samples

  std::size_t size() const { return times.size(); }
  std::size_t dimension() const { return ell.empty() ? 0 : ell.front().size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
  /// max over the grid of |ell(t_n)|
  double l_max() const;
};

class BoundUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class EstimatorBlowUp : public std::runtime_error {
 public:
  EstimatorBlowUp(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// |dz| <= l_max / sigma_min. Throws BoundUndefined when sigma_min <= 0.
double error_bound(double l_max, double sigma_min);

/// Integrates the error trajectory from residual samples on a uniform grid
/// starting at t = 0:
///
///   dz(t_{n+1}) = dz(t_n) + dt_n { F_z dz + 1/2 dz^T F_zz dz - ell(t_n) },  dz(0) = 0
///
/// with F_z, F_zz evaluated at z_hat(t_n). `order` selects truncation after
/// the first (1) or second (2) Taylor term.
ErrorDataset integrate_error(const DynamicalSystem& sys, std::span<const ResidualSample> samples,
                             int order);

/// Evaluates the solver on kM + 1 uniformly spaced points of [0, T] and
/// integrates the error recursion over them.
ErrorDataset generate_correction_dataset(const SolverState& s, const DynamicalSystem& sys,
                                         std::size_t k, int order = 2);

std::vector<double> uniform_grid(double horizon, std::size_t intervals);

struct BoundEstimate {
  double l_max = 0.0;
  double sigma_min = 0.0;
  double bound = 0.0;
};

/// l_max and the smallest singular value of F_z over the dataset grid.
/// Throws BoundUndefined if F_z is singular somewhere on the grid.
BoundEstimate estimate_bound(const ErrorDataset& data, const DynamicalSystem& sys);

/// CSV with header t,ell_1..D,zhat_1..D,dzec_1..D; values at 17 significant digits.
void write_dataset_csv(std::ostream& out, const ErrorDataset& data);
ErrorDataset read_dataset_csv(std::istream& in);

}  // namespace nnde

#endif  // NNDE_ERRQUANT_HPP
