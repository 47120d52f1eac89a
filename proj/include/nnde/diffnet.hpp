#ifndef NNDE_DIFFNET_HPP
#define NNDE_DIFFNET_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nnde/linalg.hpp"

namespace nnde {

/// Parameters of the fixed 1 -> width -> width -> D network with sin
/// activations:
///
///   N(t) = W3 sin(W2 sin(W1 t + b1) + b2) + b3
///
/// All blocks live in one contiguous buffer so that optimizers and
/// finite-difference checks can treat the parameters as a flat vector.
/// W2 and W3 are row-major.
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(std::size_t width, std::size_t out_dim);

  std::size_t width() const { return width_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::span<double> w1() { return block(0, width_); }
  std::span<double> b1() { return block(width_, width_); }
  std::span<double> w2() { return block(2 * width_, width_ * width_); }
  std::span<double> b2() { return block(w2_end(), width_); }
  std::span<double> w3() { return block(w2_end() + width_, out_dim_ * width_); }
  std::span<double> b3() { return block(w3_end(), out_dim_); }

  std::span<const double> w1() const { return block(0, width_); }
  std::span<const double> b1() const { return block(width_, width_); }
  std::span<const double> w2() const { return block(2 * width_, width_ * width_); }
  std::span<const double> b2() const { return block(w2_end(), width_); }
  std::span<const double> w3() const { return block(w2_end() + width_, out_dim_ * width_); }
  std::span<const double> b3() const { return block(w3_end(), out_dim_); }

  bool same_shape(const NetworkParams& other) const {
    return width_ == other.width_ && out_dim_ == other.out_dim_;
  }
  bool operator==(const NetworkParams&) const = default;

 private:
  std::size_t w2_end() const { return 2 * width_ + width_ * width_; }
  std::size_t w3_end() const { return w2_end() + width_ + out_dim_ * width_; }
  std::span<double> block(std::size_t offset, std::size_t n) {
    return std::span<double>(data_).subspan(offset, n);
  }
  std::span<const double> block(std::size_t offset, std::size_t n) const {
    return std::span<const double>(data_).subspan(offset, n);
  }

  std::size_t width_ = 0;
  std::size_t out_dim_ = 0;
  std::vector<double> data_;
};

/// Network output and its exact derivative with respect to the input t.
/// `time_derivative` is left empty by value-only evaluations.
struct NetEval {
  Vec value;
  Vec time_derivative;
};

/// Raised when a forward or reverse pass produces a non-finite number.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

/// Truncated-normal weights with standard deviation 1/sqrt(fan_in), cut at
/// three standard deviations; zero biases. Deterministic in `seed`.
NetworkParams init_params(std::uint64_t seed, std::size_t width, std::size_t out_dim);

NetEval forward(const NetworkParams& params, double t);
Vec forward_value(const NetworkParams& params, double t);

enum class Pass {
  value_only,            // N(t) only; the cheap path used by regression
  with_time_derivative,  // N(t) and dN/dt, propagated as a primal/tangent pair
};

/// A scalar loss over a batch of network evaluations. Receives the
/// evaluations at each batch time and must write dL/d(value) and, for
/// Pass::with_time_derivative, dL/d(time_derivative) into `adjoints`
/// (pre-sized, zero-filled). Returns the loss.
using BatchLoss =
    std::function<double(std::span<const NetEval> evals, std::span<NetEval> adjoints)>;

/// Evaluates `loss` on the batch and accumulates its gradient with respect
/// to every parameter into `grad` (overwritten; reshaped if needed) by
/// reverse accumulation through the extended forward pass.
///
/// Throws DivergenceError naming the first batch time with a non-finite
/// output or adjoint.
double loss_gradient(const NetworkParams& params, std::span<const double> times,
                     const BatchLoss& loss, NetworkParams& grad,
                     Pass pass = Pass::with_time_derivative);

struct AdamConfig {
  double learning_rate = 8e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators for one parameter set.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of `params` along `grad`.
void sgd_step(NetworkParams& params, const NetworkParams& grad, AdamState& state,
              const AdamConfig& config);

}  // namespace nnde

#endif  // NNDE_DIFFNET_HPP
