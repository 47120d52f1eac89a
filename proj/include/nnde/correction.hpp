#ifndef NNDE_CORRECTION_HPP
#define NNDE_CORRECTION_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nnde/diffnet.hpp"
#include "nnde/errquant.hpp"
#include "nnde/solver.hpp"

namespace nnde {

enum class CorrectionMode {
  regression,  // fit N2 to the integrated error trajectory
  residual,    // train N2 as a second solver on the error equation
};

std::string_view to_string(CorrectionMode mode);
CorrectionMode parse_correction_mode(std::string_view text);

/// Second network N2 with dz_hat(t) = (1 - exp(-t)) S N2(t), trained against a
/// frozen primary solver's error dataset. S = diag(output_scale) is fixed at
/// construction so that N2 works with O(1) outputs whatever the magnitude of
/// the error being corrected.
struct CorrectionState {
  NetworkParams net2;
  Vec output_scale;
  ErrorDataset dataset;
  std::size_t batch = 100;
  std::uint64_t iteration = 0;
  AdamState optimizer;
  AdamConfig adam;
  CorrectionMode mode = CorrectionMode::regression;
  int order = 2;  // Taylor truncation used by the residual mode
};

/// Fresh N2 with the primary's shape, initialized from `seed`. With
/// `scale_output`, component d of the output is scaled by max_n |dz_ec_d(t_n)|
/// (1 where that is zero); otherwise the scale is 1.
CorrectionState make_correction(const SolverState& primary, ErrorDataset dataset, CorrectionMode mode,
                                std::uint64_t seed, int order = 2, bool scale_output = true);

/// Per-component max |dz_ec| over the dataset, with zeros replaced by 1.
Vec dataset_output_scale(const ErrorDataset& data);

Prediction predict_correction(const CorrectionState& c, double t);

/// z0 + (1 - exp(-t)) [N(t) + N2(t)]
Vec corrected_prediction(const SolverState& s, const CorrectionState& c, double t);

class DatasetTooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row indices {0, M-1 distinct interior rows drawn uniformly, last}, sorted.
std::vector<std::size_t> assemble_batch(const ErrorDataset& data, std::size_t batch, Rng& rng);

/// Mean of (dz_ec - dz_hat)^2 over the given rows and components. No time
/// derivatives are evaluated.
double regression_loss(const CorrectionState& c, std::span<const std::size_t> rows,
                       NetworkParams* grad = nullptr);

double regression_train_step(CorrectionState& c, Rng& rng);

class OffGridTime : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dataset row holding time t exactly (to rounding); throws OffGridTime
/// otherwise.
std::size_t grid_index(const ErrorDataset& data, double t);

/// ell2 = ell - [F_z dz_hat + 1/2 dz_hat^T F_zz dz_hat] + d(dz_hat)/dt at a
/// stored grid time, with F derivatives at the stored z_hat.
Vec appendix_residual(const CorrectionState& c, const DynamicalSystem& sys, double t);

double appendix_loss(const CorrectionState& c, const DynamicalSystem& sys,
                     std::span<const std::size_t> rows, NetworkParams* grad = nullptr);

double appendix_train_step(CorrectionState& c, const DynamicalSystem& sys, Rng& rng);

}  // namespace nnde

#endif  // NNDE_CORRECTION_HPP
