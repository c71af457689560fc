#pragma once

#include <optional>
#include <vector>

#include "par/circuit.hpp"
#include "par/classifier.hpp"
#include "par/constraints.hpp"
#include "par/numeric.hpp"

namespace par {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs);

struct RecourseRecord {
  DiscreteInstance factual;
  DiscreteInstance pre_ls;
  DiscreteInstance post_ls;
  double y_factual = 0.0;
  double y_pre = 0.0;
  double y_post = 0.0;
  double nll_pre = 0.0;
  double nll_post = 0.0;
  double gen_seconds = 0.0;
  double refine_seconds = 0.0;
};

// Median absolute deviation of each feature's ordinal codes over the training
// rows, floored at 1 so indicator contributions stay bounded.
std::vector<double> mad_weights(const std::vector<DiscreteInstance>& train_rows);

// L1 distance over codes weighted by inverse MAD; unordered categoricals
// contribute an indicator instead of a code delta.
double similarity_distance(const DiscreteInstance& a, const DiscreteInstance& b,
                           const std::vector<double>& mad, const std::vector<bool>& ordered);

struct FoldMetrics {
  double validity_pct = 0.0;
  double actionability_pct = 0.0;
  std::optional<double> causality_pct;
  double nll_mean = 0.0;
  double similarity_mean = 0.0;
  double sparsity_mean = 0.0;
  double median_seconds = 0.0;
  double mean_yhat = 0.0;
  long count = 0;
};

// Evaluates one fold's records on either the decoded candidates (post_ls =
// false) or the refined ones.
FoldMetrics evaluate_fold(const std::vector<RecourseRecord>& records, const ConstraintSet& cs,
                          const std::vector<double>& mad, const std::vector<bool>& ordered,
                          double tau, bool post_ls);

double cross_model_yhat(const std::vector<RecourseRecord>& records, const MlpModel& f_alt,
                        const Domain& domain, bool post_ls);

struct AggregateMetrics {
  MeanStd validity_pct, actionability_pct, nll, similarity, sparsity, median_seconds, mean_yhat;
  std::optional<MeanStd> causality_pct;
  long folds = 0;
};
AggregateMetrics aggregate_folds(const std::vector<FoldMetrics>& folds);

}  // namespace par
