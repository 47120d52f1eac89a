#include <doctest.h>

#include <sstream>

#include "nnde/checkpoint.hpp"
#include "nnde/errquant.hpp"
#include "nnde/systems.hpp"

using namespace nnde;

namespace {

SolverState trained(std::uint64_t seed) {
  const NonlinearOscillator osc;
  SolverConfig cfg;
  cfg.width = 10;
  cfg.batch = 16;
  cfg.horizon = 2.5;
  cfg.adam.learning_rate = 2e-3;
  SolverState s = make_solver(Vec{1.3, 0.4}, cfg, seed);
  Rng rng(seed);
  for (int i = 0; i < 30; ++i) train_step(s, osc, rng);
  return s;
}

Checkpoint round_trip(const Checkpoint& c) {
  std::stringstream io;
  write_checkpoint(io, c);
  return read_checkpoint(io);
}

}  // namespace

TEST_CASE("solver checkpoints restore parameters and optimizer state exactly") {
  const SolverState s = trained(3);
  Checkpoint c;
  c.labels["system"] = "nl-osc";
  store_solver(c, s);
  const Checkpoint back = round_trip(c);
  CHECK(back.label("system") == "nl-osc");
  const SolverState r = load_solver(back);
  CHECK(r.net == s.net);
  CHECK(r.z0 == s.z0);
  CHECK(r.horizon == s.horizon);
  CHECK(r.batch == s.batch);
  CHECK(r.iteration == 30);
  CHECK(r.optimizer == s.optimizer);
  CHECK(r.adam.learning_rate == s.adam.learning_rate);
}

TEST_CASE("training resumed from a checkpoint continues identically") {
  const NonlinearOscillator osc;
  SolverState a = trained(4);
  Checkpoint c;
  store_solver(c, a);
  SolverState b = load_solver(round_trip(c));
  Rng ra(11), rb(11);
  for (int i = 0; i < 5; ++i) {
    train_step(a, osc, ra);
    train_step(b, osc, rb);
  }
  CHECK(a.net == b.net);
}

TEST_CASE("corrected model checkpoint stores both networks, z0, T and mode") {
  const NonlinearOscillator osc;
  const SolverState s = trained(5);
  CorrectionState corr = make_correction(s, generate_correction_dataset(s, osc, 4), CorrectionMode::residual, 9, 1);
  Rng rng(1);
  appendix_train_step(corr, osc, rng);
  const Checkpoint back = round_trip(corrected_model_checkpoint(s, corr, "nl-osc"));
  const SolverState s2 = load_solver(back, "primary.");
  const CorrectionState c2 = load_correction(back);
  CHECK(s2.net == s.net);
  CHECK(s2.z0 == s.z0);
  CHECK(s2.horizon == s.horizon);
  CHECK(c2.net2 == corr.net2);
  CHECK(c2.output_scale == corr.output_scale);
  CHECK(c2.mode == CorrectionMode::residual);
  CHECK(c2.order == 1);
  CHECK(c2.batch == corr.batch);
  CHECK(c2.iteration == 1);
  for (double t : {0.0, 1.0, 2.5}) CHECK(corrected_prediction(s2, c2, t) == corrected_prediction(s, corr, t));
}

TEST_CASE("malformed checkpoints are rejected") {
  std::stringstream wrong("something else\n");
  CHECK_THROWS(read_checkpoint(wrong));
  std::stringstream truncated("nnde-checkpoint 1\nW1 3 1 2\n");
  CHECK_THROWS(read_checkpoint(truncated));
  Checkpoint empty;
  CHECK_THROWS(load_solver(empty));
  CHECK_THROWS(empty.label("system"));
  Checkpoint c;
  store_solver(c, trained(1));
  c.arrays["W2"].pop_back();
  CHECK_THROWS(load_solver(c));
}
