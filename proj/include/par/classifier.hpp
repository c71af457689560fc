#pragma once

#include <span>
#include <vector>

#include "par/mlp.hpp"
#include "par/numeric.hpp"

namespace par {

struct ClassifierOptions {
  std::vector<int> hidden = {20, 10};
  int epochs = 100;
  int batch = 64;
  double lr = 1e-3;
  uint64_t seed = 0;
};

// Sigmoid-output MLP trained with binary cross-entropy and Adam over one-hot
// encodings of the discretized rows. Deterministic under a fixed seed.
MlpModel train_classifier(const std::vector<DiscreteInstance>& rows, const std::vector<int>& labels,
                          const Domain& domain, const ClassifierOptions& opt);

// Acceptance probability in (0, 1).
double classifier_score(const MlpModel& f, std::span<const double> onehot);
double classifier_score(const MlpModel& f, const DiscreteInstance& x, const Domain& domain);

// Youden's J over the threshold grid {0.01, 0.02, ..., 0.99}; a score >= tau
// counts as predicted-positive; ties pick the smallest tau.
double select_threshold_youden(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace par
