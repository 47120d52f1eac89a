#ifndef NNDE_CHECKPOINT_HPP
#define NNDE_CHECKPOINT_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nnde/correction.hpp"
#include "nnde/solver.hpp"

namespace nnde {

/// Text key -> array map. One entry per line:
///
///   nnde-checkpoint 1
///   @system nl-osc           (label)
///   W1 32 v1 v2 ... v32      (array: key, count, values at 17 digits)
struct Checkpoint {
  std::map<std::string, std::string> labels;
  std::map<std::string, std::vector<double>> arrays;

  const std::vector<double>& array(const std::string& key) const;
  double scalar(const std::string& key) const;
  const std::string& label(const std::string& key) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

/// Parameters, z0, T, M, iteration count and optimizer moments, keyed under
/// `prefix` (e.g. "W1" or "primary.W1").
void store_solver(Checkpoint& ckpt, const SolverState& s, const std::string& prefix = "");
SolverState load_solver(const Checkpoint& ckpt, const std::string& prefix = "");

/// Both parameter sets plus z0, T and the correction mode.
Checkpoint corrected_model_checkpoint(const SolverState& s, const CorrectionState& c,
                                      const std::string& system);
/// Restores the correction network (its dataset is not stored).
CorrectionState load_correction(const Checkpoint& ckpt, const std::string& prefix = "correction.");

}  // namespace nnde

#endif  // NNDE_CHECKPOINT_HPP
