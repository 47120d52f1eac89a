#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "nnde/csv.hpp"
#include "nnde/reference.hpp"
#include "nnde/systems.hpp"

using namespace nnde;

namespace {

double relative_drift(const DynamicalSystem& sys, const ReferenceTrajectory& r) {
  const double h0 = sys.hamiltonian(r.states.front());
  double worst = 0.0;
  for (const Vec& z : r.states) worst = std::max(worst, std::abs(sys.hamiltonian(z) - h0));
  return worst / std::max(1.0, std::abs(h0));
}

// Observed order from three step sizes via Richardson self-comparison.
double observed_order(const DynamicalSystem& sys, const Vec& z0, double horizon, double h) {
  const Vec a = rk4_integrate(sys, z0, horizon, h).states.back();
  const Vec b = rk4_integrate(sys, z0, horizon, h / 2).states.back();
  const Vec c = rk4_integrate(sys, z0, horizon, h / 4).states.back();
  return std::log2(norm(sub(a, b)) / norm(sub(b, c)));
}

}  // namespace

TEST_CASE("equilibrium start stays at the origin") {
  const HenonHeiles hh;
  const ReferenceTrajectory r = rk4_integrate(hh, Vec(4, 0.0), 2.0, 0.01);
  for (const Vec& z : r.states) CHECK(norm(z) == 0.0);
}

TEST_CASE("trajectory starts at z0 and lands exactly on T") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory r = rk4_integrate(osc, Vec{1.0, 0.0}, 1.0, 0.3);
  CHECK(r.states.front() == Vec{1.0, 0.0});
  CHECK(r.times.front() == 0.0);
  CHECK(r.times.back() == 1.0);
  CHECK(r.times.size() == 5);
  CHECK(r.horizon() == 1.0);
}

TEST_CASE("integration arguments are validated") {
  const NonlinearOscillator osc;
  CHECK_THROWS_AS(rk4_integrate(osc, Vec{1.0, 0.0}, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rk4_integrate(osc, Vec{1.0, 0.0}, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(rk4_integrate(osc, Vec{1.0}, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("escaping Henon-Heiles orbit is reported with its failure time") {
  const HenonHeiles hh;
  try {
    rk4_integrate(hh, Vec{0.0, 1.5, 0.0, 2.0}, 50.0, 0.01);
    FAIL("expected integration failure");
  } catch (const IntegrationFailure& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 50.0);
  }
}

TEST_CASE("oscillator energy is conserved at a fine step") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory r = rk4_integrate(osc, Vec{1.0, 0.0}, 10.0, 1e-4);
  CHECK(osc.hamiltonian(r.states.front()) == 0.75);
  CHECK(relative_drift(osc, r) <= 1e-10);
}

TEST_CASE("energy drift at the default step is negligible on both systems") {
  const NonlinearOscillator osc;
  const HenonHeiles hh;
  CHECK(relative_drift(osc, rk4_integrate(osc, Vec{2.3, 2.0}, 10.0, default_reference_step(10.0))) <= 1e-8);
  CHECK(relative_drift(hh, rk4_integrate(hh, Vec{0.3, -0.2, 0.25, 0.1}, 10.0, default_reference_step(10.0))) <= 1e-8);
}

TEST_CASE("RK4 converges at fourth order") {
  const NonlinearOscillator osc;
  const HenonHeiles hh;
  const double p1 = observed_order(osc, Vec{1.0, 0.0}, 10.0, 0.05);
  const double p2 = observed_order(hh, Vec{0.3, -0.2, 0.25, 0.1}, 10.0, 0.05);
  INFO("orders " << p1 << " " << p2);
  CHECK(p1 >= 3.5);
  CHECK(p1 <= 4.5);
  CHECK(p2 >= 3.5);
  CHECK(p2 <= 4.5);
  CHECK(std::pow(2.0, p1) >= 12.0);
  CHECK(std::pow(2.0, p1) <= 20.0);
}

TEST_CASE("dense output reproduces grid states and interpolates accurately") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory coarse = rk4_integrate(osc, Vec{1.0, 0.5}, 2.0, 1e-3);
  const ReferenceTrajectory fine = rk4_integrate(osc, Vec{1.0, 0.5}, 2.0, 5e-4);
  CHECK(coarse.state_at(coarse.times[17]) == coarse.states[17]);
  CHECK(coarse.state_at(2.0) == coarse.states.back());
  for (std::size_t n = 1; n < fine.times.size(); n += 2) CHECK(norm(sub(coarse.state_at(fine.times[n]), fine.states[n])) <= 1e-10);
}

TEST_CASE("external error of exact and offset predictors") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory r = rk4_integrate(osc, Vec{1.0, 0.0}, 3.0, 1e-3);
  const ErrorMetrics same = external_error([&](double t) { return r.state_at(t); }, r);
  CHECK(same.dz_avg == 0.0);
  CHECK(same.dz_max == 0.0);
  CHECK(same.times.size() == kMetricSamples);
  const Vec c{0.3, -0.4};
  const ErrorMetrics off = external_error([&](double t) { return add(r.state_at(t), c); }, r);
  CHECK(off.dz_avg == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(off.dz_max == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(off.dz_avg <= off.dz_max);
}

TEST_CASE("external error is unchanged by a common shift") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory r = rk4_integrate(osc, Vec{1.0, 0.0}, 3.0, 1e-3);
  auto pred = [&](double t) { return add(r.state_at(t), Vec{0.01 * std::sin(t), 0.02 * t}); };
  const ErrorMetrics base = external_error(pred, r);
  ReferenceTrajectory shifted = r;
  auto shift = [](double t) { return Vec{std::cos(t), t * t}; };
  for (std::size_t n = 0; n < shifted.times.size(); ++n) {
    const double t = shifted.times[n];
    shifted.states[n] = add(shifted.states[n], shift(t));
    shifted.rates[n] = add(shifted.rates[n], Vec{-std::sin(t), 2.0 * t});
  }
  const ErrorMetrics moved = external_error([&](double t) { return add(pred(t), shift(t)); }, shifted);
  CHECK(moved.dz_avg == doctest::Approx(base.dz_avg).epsilon(1e-9));
  CHECK(moved.dz_max == doctest::Approx(base.dz_max).epsilon(1e-9));
}

TEST_CASE("runtime meter amortizes setup over iterations") {
  CHECK(runtime_meter({0.0, 1.0, 10}) == doctest::Approx(0.1));
  CHECK(runtime_meter({1.0, 0.0, 100}) == doctest::Approx(0.01));
  CHECK_THROWS_AS(runtime_meter({1.0, 1.0, 0}), std::invalid_argument);
}

TEST_CASE("stopwatch is monotonic") {
  Stopwatch sw;
  const double a = sw.seconds();
  std::this_thread::sleep_for(std::chrono::milliseconds(2));
  CHECK(sw.seconds() > a);
}

TEST_CASE("trajectory CSV has a header and one row per kept sample") {
  const NonlinearOscillator osc;
  const ReferenceTrajectory r = rk4_integrate(osc, Vec{1.0, 0.0}, 1.0, 0.1);
  std::stringstream io;
  write_trajectory_csv(io, r, 2);
  const CsvTable t = read_csv(io);
  CHECK(t.header == std::vector<std::string>{"t", "z_1", "z_2"});
  CHECK(t.rows.size() == 6);
  CHECK(t.rows.back()[0] == 1.0);
}
