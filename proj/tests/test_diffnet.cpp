#include <doctest.h>

#include <cmath>

#include "nnde/diffnet.hpp"
#include "nnde/solver.hpp"
#include "nnde/systems.hpp"
#include "support/fd.hpp"

using namespace nnde;
using nnde::testing::check_gradient;
using nnde::testing::fd2;

TEST_CASE("init_params is deterministic per seed") {
  const NetworkParams a = init_params(7, 32, 2);
  const NetworkParams b = init_params(7, 32, 2);
  const NetworkParams c = init_params(8, 32, 2);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("init_params respects the truncated fan-in scaling and zero biases") {
  for (std::uint64_t seed : {1u, 2u, 3u, 99u}) {
    const NetworkParams p = init_params(seed, 16, 4);
    for (double w : p.w1()) CHECK(std::abs(w) <= 3.0);
    for (double w : p.w2()) CHECK(std::abs(w) <= 3.0 / std::sqrt(16.0));
    for (double w : p.w3()) CHECK(std::abs(w) <= 3.0 / std::sqrt(16.0));
    for (auto block : {p.b1(), p.b2(), p.b3()})
      for (double b : block) CHECK(b == 0.0);
    CHECK(all_finite(p.flat()));
  }
}

TEST_CASE("zero-width or zero-output networks are rejected") {
  CHECK_THROWS_AS(NetworkParams(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(NetworkParams(4, 0), std::invalid_argument);
}

TEST_CASE("all-zero network evaluates to zero with zero derivative") {
  const NetworkParams p(8, 3);
  for (double t : {0.0, 0.7, 5.0}) {
    const NetEval e = forward(p, t);
    for (double v : e.value) CHECK(v == 0.0);
    for (double v : e.time_derivative) CHECK(v == 0.0);
  }
}

TEST_CASE("width-one network matches the closed-form chain rule") {
  NetworkParams p(1, 1);
  const double a = 1.3, b = -0.2, v = 0.8, b2 = 0.1, w = 2.0, c = 0.5;
  p.w1()[0] = a;
  p.b1()[0] = b;
  p.w2()[0] = v;
  p.b2()[0] = b2;
  p.w3()[0] = w;
  p.b3()[0] = c;
  for (double t : {0.0, 0.4, 2.5}) {
    const double inner = v * std::sin(a * t + b) + b2;
    const NetEval e = forward(p, t);
    CHECK(e.value[0] == doctest::Approx(w * std::sin(inner) + c).epsilon(1e-14));
    CHECK(e.time_derivative[0] ==
          doctest::Approx(w * std::cos(inner) * v * std::cos(a * t + b) * a).epsilon(1e-14));
  }
}

TEST_CASE("time derivative agrees with a central difference") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    for (std::size_t dim : {2u, 4u}) {
      const NetworkParams p = init_params(seed, 32, dim);
      for (double t : {0.3, 1.7, 9.2}) {
        const NetEval e = forward(p, t);
        for (std::size_t d = 0; d < dim; ++d) {
          const double numeric = fd2([&](double x) { return forward_value(p, x)[d]; }, t, 1e-6);
          CHECK(std::abs(e.time_derivative[d] - numeric) <= 1e-6 * (1.0 + std::abs(e.time_derivative[d])));
        }
      }
    }
  }
}

TEST_CASE("forward_value matches the value half of forward") {
  const NetworkParams p = init_params(5, 12, 2);
  for (double t : {0.0, 1.0, 3.3}) CHECK(forward_value(p, t) == forward(p, t).value);
}

TEST_CASE("constant loss has zero gradient") {
  const NetworkParams p = init_params(3, 8, 2);
  NetworkParams g;
  const std::vector<double> times{0.1, 0.5, 0.9};
  const double v = loss_gradient(p, times, [](auto, auto) { return 4.2; }, g);
  CHECK(v == 4.2);
  for (double x : g.flat()) CHECK(x == 0.0);
}

TEST_CASE("squared output of the zero network has zero gradient") {
  const NetworkParams p(6, 2);
  NetworkParams g;
  const std::vector<double> times{0.4};
  auto loss = [](std::span<const NetEval> e, std::span<NetEval> adj) {
    double s = 0.0;
    for (std::size_t d = 0; d < e[0].value.size(); ++d) {
      s += e[0].value[d] * e[0].value[d];
      adj[0].value[d] = 2.0 * e[0].value[d];
    }
    return s;
  };
  CHECK(loss_gradient(p, times, loss, g) == 0.0);
  for (double x : g.flat()) CHECK(x == 0.0);
}

TEST_CASE("residual-loss gradient agrees with finite differences") {
  for (const char* name : {"nl-osc", "henon-heiles"}) {
    const auto sys = make_system(name);
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      SolverConfig cfg;
      cfg.width = 8;
      cfg.horizon = 3.0;
      const Vec z0 = sys->dimension() == 2 ? Vec{1.0, 0.2} : Vec{0.1, -0.1, 0.25, 0.1};
      SolverState s = make_solver(z0, cfg, seed);
      const std::vector<double> times{0.0, 0.4, 1.1, 2.0, 3.0};
      NetworkParams grad;
      residual_loss(s, *sys, times, &grad);
      const auto check = check_gradient(s.net, grad, [&](const NetworkParams& p) {
        SolverState probe = s;
        probe.net = p;
        return residual_loss(probe, *sys, times);
      });
      INFO(name << " seed " << seed << " worst coordinate " << check.worst_index);
      CHECK(check.max_rel_error <= 1e-5);
    }
  }
}

TEST_CASE("non-finite parameters raise a divergence error") {
  NetworkParams p = init_params(1, 4, 2);
  p.w1()[0] = std::nan("");
  NetworkParams g;
  const std::vector<double> times{0.5};
  CHECK_THROWS_AS(loss_gradient(p, times, [](auto, auto) { return 0.0; }, g), DivergenceError);
}

TEST_CASE("Adam step with zero gradient from a fresh state leaves parameters unchanged") {
  NetworkParams p = init_params(4, 6, 2);
  const NetworkParams before = p;
  NetworkParams g(6, 2);
  AdamState st;
  sgd_step(p, g, st, AdamConfig{});
  CHECK(p == before);
  CHECK(st.step == 1);
  for (double m : st.m) CHECK(m == 0.0);
}

TEST_CASE("Adam moments decay under a zero gradient") {
  NetworkParams p = init_params(4, 6, 2);
  NetworkParams g(6, 2);
  AdamState st;
  st.m.assign(p.size(), 1.0);
  st.v.assign(p.size(), 1.0);
  st.step = 3;
  const AdamConfig cfg;
  sgd_step(p, g, st, cfg);
  for (double m : st.m) CHECK(m == doctest::Approx(cfg.beta1));
  for (double v : st.v) CHECK(v == doctest::Approx(cfg.beta2));
}

TEST_CASE("repeated gradient moves parameters against it") {
  NetworkParams p = init_params(4, 6, 2);
  const NetworkParams start = p;
  NetworkParams g(6, 2);
  for (std::size_t i = 0; i < g.size(); ++i) g.flat()[i] = (i % 2 == 0) ? 1.0 : -0.5;
  AdamState st;
  for (int i = 0; i < 5; ++i) sgd_step(p, g, st, AdamConfig{});
  for (std::size_t i = 0; i < g.size(); ++i) CHECK((p.flat()[i] - start.flat()[i]) * g.flat()[i] < 0.0);
}

TEST_CASE("Adam rejects mismatched shapes") {
  NetworkParams p(4, 2);
  NetworkParams g(5, 2);
  AdamState st;
  CHECK_THROWS_AS(sgd_step(p, g, st, AdamConfig{}), std::invalid_argument);
}

TEST_CASE("identical training runs give bit-identical parameters") {
  const auto sys = make_system("nl-osc");
  SolverConfig cfg;
  cfg.width = 16;
  cfg.batch = 20;
  const Vec z0{1.0, 0.0};
  SolverState a = make_solver(z0, cfg, 5), b = make_solver(z0, cfg, 5);
  Rng ra(9), rb(9);
  for (int i = 0; i < 25; ++i) {
    train_step(a, *sys, ra);
    train_step(b, *sys, rb);
  }
  CHECK(a.net == b.net);
  CHECK(a.optimizer == b.optimizer);
}
