#pragma once

#include <vector>

#include "par/circuit.hpp"
#include "par/numeric.hpp"

namespace par {

struct LearnSpnOptions {
  int min_rows = 200;       // below this, factorize the slice into leaves
  int min_cols = 3;         // below this, factorize the slice into leaves
  double leaf_alpha = 0.1;  // Laplace smoothing for leaf estimates
  double independence_alpha = 0.05;  // G-test significance; p above it means independent
  int kmeans_restarts = 10;
  int kmeans_iters = 50;
  double weight_floor = 1e-6;
};

// Recursive structure learning: independence-driven column splits into product
// nodes, 2-means row clustering into sum nodes, Laplace-smoothed categorical
// leaves at the base.
Circuit learn_structure(const std::vector<DiscreteInstance>& rows, const std::vector<int>& cards,
                        const LearnSpnOptions& opt, Rng& rng);

// Pairwise G-test p-value of independence between features j1 and j2 over the
// given rows (chi-square tail with (r-1)(c-1) degrees of freedom over observed
// categories).
double g_test_p_value(const std::vector<DiscreteInstance>& rows, const std::vector<int>& row_idx,
                      int j1, int j2, const std::vector<int>& cards);

}  // namespace par
