#include "par/local_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>

namespace par {

DiscreteInstance repair_causality(DiscreteInstance c, const DiscreteInstance& factual,
                                  const ConstraintSet& cs) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (const CausalRule& r : cs.rules) {
      if (c[r.cause] <= factual[r.cause] && c[r.effect] > factual[r.effect]) {
        c[r.effect] = factual[r.effect];
        changed = true;
      }
    }
  }
  return c;
}

DiscreteInstance sparsify(DiscreteInstance c, const DiscreteInstance& factual,
                          const ConstraintSet& cs, const MlpModel& f, const Domain& domain,
                          double budget, const Circuit* p_plus, const RefineConfig& cfg) {
  bool guard = p_plus != nullptr && cfg.delta_max.has_value();
  double ref_ll = guard ? p_plus->log_likelihood(c) : 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<int, int>> order;
    for (int j : cs.mutable_features())
      if (c[j] != factual[j]) order.push_back({std::abs(c[j] - factual[j]), j});
    std::sort(order.begin(), order.end());
    for (auto [mag, j] : order) {
      (void)mag;
      DiscreteInstance t = c;
      t[j] = factual[j];
      t = repair_causality(std::move(t), factual, cs);
      if (!within_budget(t, factual, cs, budget) || !feasible(t, factual, cs)) continue;
      if (classifier_score(f, t, domain) < cfg.tau) continue;
      if (guard) {
        double ll = p_plus->log_likelihood(t);
        if (ll < ref_ll - *cfg.delta_max) continue;
        ref_ll = ll;
      }
      c = std::move(t);
      changed = true;
      break;
    }
  }
  return c;
}

DiscreteInstance refine(const DiscreteInstance& c0, const DiscreteInstance& factual,
                        const ConstraintSet& cs, const MlpModel& f, const Domain& domain,
                        const Circuit* p_plus, const RefineConfig& cfg) {
  double budget = static_cast<double>(hamming_mutable(c0, factual, cs));
  DiscreteInstance c = c0;
  for (int j = 0; j < cs.num_features(); ++j)
    if (cs.immutable[j]) c[j] = factual[j];
  c = repair_causality(std::move(c), factual, cs);
  if (!within_budget(c, factual, cs, budget) || !feasible(c, factual, cs)) c = factual;

  double y = classifier_score(f, c, domain);
  if (y >= cfg.tau) return sparsify(std::move(c), factual, cs, f, domain, budget, p_plus, cfg);

  DiscreteInstance best = c;
  double best_y = y;
  double best_ll = p_plus ? p_plus->log_likelihood(c) : 0.0;
  DiscreteInstance valid;
  std::tuple<double, int, double> valid_key;
  bool have_valid = false;

  for (int j : cs.mutable_features()) {
    for (int v = 0; v < cs.cards[j]; ++v) {
      if (v == c[j]) continue;
      DiscreteInstance t = c;
      t[j] = v;
      t = repair_causality(std::move(t), factual, cs);
      if (!within_budget(t, factual, cs, budget) || !feasible(t, factual, cs)) continue;
      double ty = classifier_score(f, t, domain);
      double tll = p_plus ? p_plus->log_likelihood(t) : 0.0;
      if (ty >= cfg.tau) {
        std::tuple<double, int, double> key{-ty, hamming_mutable(t, factual, cs), -tll};
        if (!have_valid || key < valid_key) {
          have_valid = true;
          valid_key = key;
          valid = std::move(t);
        }
      } else if (ty > best_y || (ty == best_y && tll > best_ll)) {
        best = std::move(t);
        best_y = ty;
        best_ll = tll;
      }
    }
  }
  if (!have_valid) return best;
  return sparsify(std::move(valid), factual, cs, f, domain, budget, p_plus, cfg);
}

}  // namespace par
