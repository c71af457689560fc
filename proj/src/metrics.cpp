#include "par/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace par {

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  ms.mean = mean_of(xs);
  ms.std = sample_std(xs);
  return ms;
}

std::vector<double> mad_weights(const std::vector<DiscreteInstance>& train_rows) {
  require(!train_rows.empty(), "mad_weights: no rows");
  size_t d = train_rows.front().size();
  std::vector<double> mad(d, 1.0);
  std::vector<double> col(train_rows.size());
  for (size_t j = 0; j < d; ++j) {
    for (size_t i = 0; i < train_rows.size(); ++i) col[i] = train_rows[i][j];
    double med = median_of(col);
    for (double& v : col) v = std::abs(v - med);
    mad[j] = std::max(1.0, median_of(col));
  }
  return mad;
}

double similarity_distance(const DiscreteInstance& a, const DiscreteInstance& b,
                           const std::vector<double>& mad, const std::vector<bool>& ordered) {
  require(a.size() == b.size() && a.size() == mad.size() && a.size() == ordered.size(),
          "similarity_distance: arity mismatch");
  double acc = 0.0;
  for (size_t j = 0; j < a.size(); ++j) {
    double delta = ordered[j] ? std::abs(static_cast<double>(a[j] - b[j]))
                              : static_cast<double>(a[j] != b[j]);
    acc += delta / mad[j];
  }
  return acc;
}

namespace {

bool respects_actionability(const DiscreteInstance& c, const DiscreteInstance& f,
                            const ConstraintSet& cs) {
  for (int j = 0; j < cs.num_features(); ++j) {
    if (cs.immutable[j] && c[j] != f[j]) return false;
    if (cs.monotone[j] && c[j] < f[j]) return false;
  }
  return true;
}

bool respects_causality(const DiscreteInstance& c, const DiscreteInstance& f,
                        const ConstraintSet& cs) {
  for (const CausalRule& r : cs.rules)
    if (c[r.effect] > f[r.effect] && !(c[r.cause] > f[r.cause])) return false;
  return true;
}

}  // namespace

FoldMetrics evaluate_fold(const std::vector<RecourseRecord>& records, const ConstraintSet& cs,
                          const std::vector<double>& mad, const std::vector<bool>& ordered,
                          double tau, bool post_ls) {
  require(!records.empty(), "evaluate_fold: no records");
  FoldMetrics m;
  m.count = static_cast<long>(records.size());
  double valid = 0, actionable = 0, causal = 0;
  std::vector<double> nll, sims, sparsities, times;
  double yhat_sum = 0.0;
  for (const RecourseRecord& r : records) {
    const DiscreteInstance& c = post_ls ? r.post_ls : r.pre_ls;
    double y = post_ls ? r.y_post : r.y_pre;
    if (y >= tau) valid += 1;
    if (respects_actionability(c, r.factual, cs)) actionable += 1;
    if (respects_causality(c, r.factual, cs)) causal += 1;
    nll.push_back(post_ls ? r.nll_post : r.nll_pre);
    sims.push_back(similarity_distance(c, r.factual, mad, ordered));
    sparsities.push_back(hamming_mutable(c, r.factual, cs));
    times.push_back(post_ls ? r.gen_seconds + r.refine_seconds : r.gen_seconds);
    yhat_sum += y;
  }
  double n = static_cast<double>(records.size());
  m.validity_pct = 100.0 * valid / n;
  m.actionability_pct = 100.0 * actionable / n;
  if (!cs.rules.empty()) m.causality_pct = 100.0 * causal / n;
  m.nll_mean = mean_of(nll);
  m.similarity_mean = mean_of(sims);
  m.sparsity_mean = mean_of(sparsities);
  m.median_seconds = median_of(times);
  m.mean_yhat = yhat_sum / n;
  return m;
}

double cross_model_yhat(const std::vector<RecourseRecord>& records, const MlpModel& f_alt,
                        const Domain& domain, bool post_ls) {
  require(!records.empty(), "cross_model_yhat: no records");
  double acc = 0.0;
  for (const RecourseRecord& r : records)
    acc += classifier_score(f_alt, post_ls ? r.post_ls : r.pre_ls, domain);
  return acc / static_cast<double>(records.size());
}

AggregateMetrics aggregate_folds(const std::vector<FoldMetrics>& folds) {
  require(!folds.empty(), "aggregate_folds: no folds");
  AggregateMetrics agg;
  agg.folds = static_cast<long>(folds.size());
  auto collect = [&](auto getter) {
    std::vector<double> xs;
    for (const FoldMetrics& f : folds) xs.push_back(getter(f));
    return mean_std(xs);
  };
  agg.validity_pct = collect([](const FoldMetrics& f) { return f.validity_pct; });
  agg.actionability_pct = collect([](const FoldMetrics& f) { return f.actionability_pct; });
  agg.nll = collect([](const FoldMetrics& f) { return f.nll_mean; });
  agg.similarity = collect([](const FoldMetrics& f) { return f.similarity_mean; });
  agg.sparsity = collect([](const FoldMetrics& f) { return f.sparsity_mean; });
  agg.median_seconds = collect([](const FoldMetrics& f) { return f.median_seconds; });
  agg.mean_yhat = collect([](const FoldMetrics& f) { return f.mean_yhat; });
  bool any_causal = false;
  std::vector<double> causal;
  for (const FoldMetrics& f : folds)
    if (f.causality_pct) {
      causal.push_back(*f.causality_pct);
      any_causal = true;
    }
  if (any_causal) agg.causality_pct = mean_std(causal);
  return agg;
}

}  // namespace par
