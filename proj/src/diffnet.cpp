#include "nnde/diffnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "vecmath.hpp"

namespace nnde {

NetworkParams::NetworkParams(std::size_t width, std::size_t out_dim)
    : width_(width), out_dim_(out_dim) {
  if (width == 0 || out_dim == 0) throw std::invalid_argument("network width and output dimension must be >= 1");
  data_.assign(2 * width + width * width + width + out_dim * width + out_dim, 0.0);
}

NetworkParams init_params(std::uint64_t seed, std::size_t width, std::size_t out_dim) {
  NetworkParams p(width, out_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::span<double> block, std::size_t fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : block) {
      double x = normal(rng);
      while (std::abs(x) > 3.0) x = normal(rng);
      w = scale * x;
    }
  };
  fill(p.w1(), 1);
  fill(p.w2(), width);
  fill(p.w3(), width);
  return p;
}

namespace {

// Per-point activations kept for the reverse sweep.
//   h1 = sin(a1), c1 = cos(a1)            a1 = W1 t + b1
//   h2 = sin(a2), c2 = cos(a2)            a2 = W2 h1 + b2
//   a2d = W2 (c1 .* W1)                   tangent of a2 (time-derivative pass only)
struct PointCache {
  std::span<const double> h1, c1, h2, c2, a2d;
};

// Layer-major storage: each quantity is one points x width block, so that
// the activations of a whole batch go through a single sin/cos call.
class Tape {
 public:
  Tape(std::size_t points, std::size_t width, Pass pass)
      : points_(points), width_(width), tangent_(pass == Pass::with_time_derivative),
        pre_(points * width), h1_(points * width), c1_(points * width), h2_(points * width),
        c2_(points * width), a2d_(tangent_ ? points * width : 0) {}

  PointCache at(std::size_t n) const {
    auto row = [&](const std::vector<double>& v) { return std::span<const double>(v).subspan(n * width_, width_); };
    return {row(h1_), row(c1_), row(h2_), row(c2_), tangent_ ? row(a2d_) : std::span<const double>{}};
  }

  void forward(const NetworkParams& p, std::span<const double> times, std::span<NetEval> out);

 private:
  std::size_t points_;
  std::size_t width_;
  bool tangent_;
  std::vector<double> pre_, h1_, c1_, h2_, c2_, a2d_;
};

void Tape::forward(const NetworkParams& p, std::span<const double> times, std::span<NetEval> out) {
  const std::size_t w = width_;
  const std::size_t d_out = p.out_dim();
  const double* w1 = p.w1().data();
  const double* b1 = p.b1().data();
  const double* w2 = p.w2().data();
  const double* b2 = p.b2().data();
  const double* w3 = p.w3().data();
  const double* b3 = p.b3().data();

  for (std::size_t k = 0; k < points_; ++k)
    for (std::size_t j = 0; j < w; ++j) pre_[k * w + j] = w1[j] * times[k] + b1[j];
  detail::sin_cos_array(pre_.data(), h1_.data(), c1_.data(), pre_.size());

  std::vector<double> h1d(w);
  for (std::size_t k = 0; k < points_; ++k) {
    const double* h1 = h1_.data() + k * w;
    double* a2 = pre_.data() + k * w;
    if (tangent_) {
      const double* c1 = c1_.data() + k * w;
      double* a2d = a2d_.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) h1d[j] = c1[j] * w1[j];
      for (std::size_t i = 0; i < w; ++i) {
        const double* row = w2 + i * w;
        double v = b2[i], vd = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          v += row[j] * h1[j];
          vd += row[j] * h1d[j];
        }
        a2[i] = v;
        a2d[i] = vd;
      }
    } else {
      for (std::size_t i = 0; i < w; ++i) {
        const double* row = w2 + i * w;
        double v = b2[i];
        for (std::size_t j = 0; j < w; ++j) v += row[j] * h1[j];
        a2[i] = v;
      }
    }
  }
  detail::sin_cos_array(pre_.data(), h2_.data(), c2_.data(), pre_.size());

  for (std::size_t k = 0; k < points_; ++k) {
    const double* h2 = h2_.data() + k * w;
    NetEval& e = out[k];
    e.value.assign(d_out, 0.0);
    if (tangent_) e.time_derivative.assign(d_out, 0.0);
    else e.time_derivative.clear();
    for (std::size_t d = 0; d < d_out; ++d) {
      const double* row = w3 + d * w;
      double v = b3[d];
      for (std::size_t j = 0; j < w; ++j) v += row[j] * h2[j];
      e.value[d] = v;
    }
    if (tangent_) {
      const double* c2 = c2_.data() + k * w;
      const double* a2d = a2d_.data() + k * w;
      for (std::size_t j = 0; j < w; ++j) h1d[j] = c2[j] * a2d[j];
      for (std::size_t d = 0; d < d_out; ++d) {
        const double* row = w3 + d * w;
        double vd = 0.0;
        for (std::size_t j = 0; j < w; ++j) vd += row[j] * h1d[j];
        e.time_derivative[d] = vd;
      }
    }
  }
}

// Scratch vectors reused across points of one reverse sweep.
struct ReverseScratch {
  std::vector<double> gh2, gh2d, ga2, ga2d, gh1, gh1d;
  explicit ReverseScratch(std::size_t w) : gh2(w), gh2d(w), ga2(w), ga2d(w), gh1(w), gh1d(w) {}
};

void reverse_point(const NetworkParams& p, double t, const PointCache& c, const NetEval& adj,
                   ReverseScratch& s, NetworkParams& grad) {
  const std::size_t w = p.width();
  const std::size_t d_out = p.out_dim();
  const double* w1 = p.w1().data();
  const double* w2 = p.w2().data();
  const double* w3 = p.w3().data();
  double* gw1 = grad.w1().data();
  double* gb1 = grad.b1().data();
  double* gw2 = grad.w2().data();
  double* gb2 = grad.b2().data();
  double* gw3 = grad.w3().data();
  double* gb3 = grad.b3().data();
  const bool tangent = !c.a2d.empty();

  std::fill(s.gh2.begin(), s.gh2.end(), 0.0);
  if (tangent) std::fill(s.gh2d.begin(), s.gh2d.end(), 0.0);

  // output layer
  for (std::size_t d = 0; d < d_out; ++d) {
    const double gv = adj.value[d];
    const double gvd = tangent ? adj.time_derivative[d] : 0.0;
    gb3[d] += gv;
    const double* row = w3 + d * w;
    double* grow = gw3 + d * w;
    if (tangent) {
      for (std::size_t j = 0; j < w; ++j) {
        grow[j] += gv * c.h2[j] + gvd * (c.c2[j] * c.a2d[j]);
        s.gh2[j] += row[j] * gv;
        s.gh2d[j] += row[j] * gvd;
      }
    } else {
      for (std::size_t j = 0; j < w; ++j) {
        grow[j] += gv * c.h2[j];
        s.gh2[j] += row[j] * gv;
      }
    }
  }

  // second hidden layer: h2 = sin(a2), h2d = cos(a2) a2d
  for (std::size_t i = 0; i < w; ++i) {
    if (tangent) {
      s.ga2[i] = s.gh2[i] * c.c2[i] - s.gh2d[i] * c.h2[i] * c.a2d[i];
      s.ga2d[i] = s.gh2d[i] * c.c2[i];
    } else {
      s.ga2[i] = s.gh2[i] * c.c2[i];
    }
    gb2[i] += s.ga2[i];
  }

  std::fill(s.gh1.begin(), s.gh1.end(), 0.0);
  if (tangent) std::fill(s.gh1d.begin(), s.gh1d.end(), 0.0);
  for (std::size_t i = 0; i < w; ++i) {
    const double* row = w2 + i * w;
    double* grow = gw2 + i * w;
    const double ga = s.ga2[i];
    if (tangent) {
      const double gad = s.ga2d[i];
      for (std::size_t j = 0; j < w; ++j) {
        grow[j] += ga * c.h1[j] + gad * (c.c1[j] * w1[j]);
        s.gh1[j] += row[j] * ga;
        s.gh1d[j] += row[j] * gad;
      }
    } else {
      for (std::size_t j = 0; j < w; ++j) {
        grow[j] += ga * c.h1[j];
        s.gh1[j] += row[j] * ga;
      }
    }
  }

  // first hidden layer: h1 = sin(W1 t + b1), h1d = cos(W1 t + b1) W1
  for (std::size_t j = 0; j < w; ++j) {
    double ga1 = s.gh1[j] * c.c1[j];
    double gw = 0.0;
    if (tangent) {
      ga1 -= s.gh1d[j] * c.h1[j] * w1[j];
      gw = s.gh1d[j] * c.c1[j];
    }
    gw1[j] += ga1 * t + gw;
    gb1[j] += ga1;
  }
}

}  // namespace

NetEval forward(const NetworkParams& params, double t) {
  Tape tape(1, params.width(), Pass::with_time_derivative);
  NetEval out;
  tape.forward(params, std::span<const double>(&t, 1), std::span<NetEval>(&out, 1));
  return out;
}

Vec forward_value(const NetworkParams& params, double t) {
  Tape tape(1, params.width(), Pass::value_only);
  NetEval out;
  tape.forward(params, std::span<const double>(&t, 1), std::span<NetEval>(&out, 1));
  return std::move(out.value);
}

double loss_gradient(const NetworkParams& params, std::span<const double> times,
                     const BatchLoss& loss, NetworkParams& grad, Pass pass) {
  const std::size_t n = times.size();
  const std::size_t d_out = params.out_dim();
  const bool tangent = pass == Pass::with_time_derivative;

  Tape tape(n, params.width(), pass);
  std::vector<NetEval> evals(n);
  tape.forward(params, times, evals);
  for (std::size_t k = 0; k < n; ++k) {
    if (!all_finite(evals[k].value) || !all_finite(evals[k].time_derivative))
      throw DivergenceError("non-finite network output at t=" + std::to_string(times[k]), times[k]);
  }

  std::vector<NetEval> adjoints(n);
  for (auto& a : adjoints) {
    a.value.assign(d_out, 0.0);
    if (tangent) a.time_derivative.assign(d_out, 0.0);
  }
  const double value = loss(evals, adjoints);

  if (!grad.same_shape(params)) grad = NetworkParams(params.width(), d_out);
  std::fill(grad.flat().begin(), grad.flat().end(), 0.0);
  if (!std::isfinite(value)) {
    throw DivergenceError("non-finite loss", n > 0 ? times[0] : 0.0);
  }

  ReverseScratch scratch(params.width());
  for (std::size_t k = 0; k < n; ++k) {
    if (!all_finite(adjoints[k].value) || !all_finite(adjoints[k].time_derivative))
      throw DivergenceError("non-finite loss adjoint at t=" + std::to_string(times[k]), times[k]);
    reverse_point(params, times[k], tape.at(k), adjoints[k], scratch, grad);
  }
  return value;
}

void sgd_step(NetworkParams& params, const NetworkParams& grad, AdamState& state,
              const AdamConfig& config) {
  if (!params.same_shape(grad)) throw std::invalid_argument("sgd_step: gradient shape mismatch");
  const std::size_t n = params.size();
  if (state.m.size() != n) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  std::span<double> x = params.flat();
  std::span<const double> g = grad.flat();
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    x[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace nnde
