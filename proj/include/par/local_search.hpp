#pragma once

#include <optional>

#include "par/circuit.hpp"
#include "par/classifier.hpp"
#include "par/constraints.hpp"
#include "par/mlp.hpp"
#include "par/numeric.hpp"

namespace par {

struct RefineConfig {
  double tau = 0.5;
  // When set, a sparsification step may not drop log p+ by more than this many
  // nats below the running reference.
  std::optional<double> delta_max;
};

// Clamps every effect back to its factual value whenever its cause did not
// strictly increase. Runs to a fixed point so rule chains cannot leave a
// violated pair behind.
DiscreteInstance repair_causality(DiscreteInstance c, const DiscreteInstance& factual,
                                  const ConstraintSet& cs);

// Greedily reverts changed mutable features (smallest code delta first) while
// the candidate stays feasible, within budget and accepted by the classifier.
DiscreteInstance sparsify(DiscreteInstance c, const DiscreteInstance& factual,
                          const ConstraintSet& cs, const MlpModel& f, const Domain& domain,
                          double budget, const Circuit* p_plus, const RefineConfig& cfg);

// Two-phase local search around a decoded candidate: repair constraints, then
// either sparsify (already valid) or explore single-feature deviations within
// the candidate's own Hamming budget to restore validity.
DiscreteInstance refine(const DiscreteInstance& c0, const DiscreteInstance& factual,
                        const ConstraintSet& cs, const MlpModel& f, const Domain& domain,
                        const Circuit* p_plus, const RefineConfig& cfg);

}  // namespace par
