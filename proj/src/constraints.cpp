#include "par/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace par {

std::vector<int> ConstraintSet::mutable_features() const {
  std::vector<int> out;
  for (int j = 0; j < num_features(); ++j)
    if (!immutable[j]) out.push_back(j);
  return out;
}

std::vector<ConstraintSet::JointGroup> ConstraintSet::joint_groups() const {
  std::vector<CausalRule> active;
  for (const CausalRule& r : rules)
    if (!immutable[r.effect] && !immutable[r.cause]) active.push_back(r);
  if (active.empty()) return {};

  std::map<int, int> comp;  // feature -> group id (union by relabel, few features)
  int next = 0;
  for (const CausalRule& r : active) {
    auto ie = comp.find(r.effect);
    auto ic = comp.find(r.cause);
    if (ie == comp.end() && ic == comp.end()) {
      comp[r.effect] = comp[r.cause] = next++;
    } else if (ie == comp.end()) {
      comp[r.effect] = ic->second;
    } else if (ic == comp.end()) {
      comp[r.cause] = ie->second;
    } else if (ie->second != ic->second) {
      int from = ie->second, to = ic->second;
      for (auto& kv : comp)
        if (kv.second == from) kv.second = to;
    }
  }
  std::map<int, JointGroup> groups;
  for (const CausalRule& r : active) groups[comp.at(r.effect)].rules.push_back(r);
  std::vector<JointGroup> out;
  for (auto& kv : groups) {
    JointGroup g = std::move(kv.second);
    std::set<int> causes, effects;
    for (const CausalRule& r : g.rules) causes.insert(r.cause);
    for (const CausalRule& r : g.rules)
      if (!causes.count(r.effect)) effects.insert(r.effect);
    g.members.assign(causes.begin(), causes.end());
    g.members.insert(g.members.end(), effects.begin(), effects.end());
    out.push_back(std::move(g));
  }
  return out;
}

void ConstraintSet::validate() const {
  size_t d = cards.size();
  require(immutable.size() == d && monotone.size() == d && ordered.size() == d,
          "constraints: flag arity mismatch");
  for (int c : cards) require(c >= 1, "constraints: bad cardinality");
  for (int j = 0; j < num_features(); ++j) {
    if (monotone[j]) require(ordered[j], "constraints: monotone feature must be ordered");
  }
  for (const CausalRule& r : rules) {
    require(r.effect >= 0 && r.effect < num_features() && r.cause >= 0 && r.cause < num_features(),
            "constraints: causal rule index out of range");
    require(r.effect != r.cause, "constraints: causal rule with effect == cause");
    require(ordered[r.effect] && ordered[r.cause],
            "constraints: causal rule endpoints must be ordered");
  }
  require(budget >= 0.0, "constraints: negative budget");
}

ConstraintSet build_constraints(const Schema& schema, const Discretizer& disc, double budget) {
  const auto& feats = disc.features();
  ConstraintSet cs;
  cs.budget = budget;
  for (size_t j = 0; j < feats.size(); ++j) {
    const FeatureSpec& spec = schema.features.at(j);
    require(spec.name == feats[j].name, "constraints: schema and discretizer disagree");
    cs.cards.push_back(feats[j].cardinality());
    cs.immutable.push_back(spec.immutable);
    cs.monotone.push_back(spec.monotone_nondecreasing);
    cs.ordered.push_back(feats[j].ordered);
  }
  for (const CausalRuleSpec& r : schema.causal_rules) {
    CausalRule rule;
    rule.effect = schema.feature_index(r.effect);
    rule.cause = schema.feature_index(r.cause);
    cs.rules.push_back(rule);
  }
  cs.validate();
  return cs;
}

void mask_monotone(std::span<double> logits, int factual) {
  require(factual >= 0 && factual < static_cast<int>(logits.size()),
          "mask_monotone: factual out of range");
  for (int a = 0; a < factual; ++a) logits[a] = kMaskedLogit;
}

void mask_causal_clamp(std::span<double> logits, int factual) {
  require(factual >= 0 && factual < static_cast<int>(logits.size()),
          "mask_causal_clamp: factual out of range");
  for (size_t a = static_cast<size_t>(factual) + 1; a < logits.size(); ++a)
    logits[a] = kMaskedLogit;
}

CausalJointResult apply_causal_joint(std::span<const double> logits_effect,
                                     std::span<const double> logits_cause, int factual_effect,
                                     int factual_cause) {
  int ce = static_cast<int>(logits_effect.size());
  int cc = static_cast<int>(logits_cause.size());
  require(factual_effect >= 0 && factual_effect < ce, "apply_causal_joint: factual effect out of range");
  require(factual_cause >= 0 && factual_cause < cc, "apply_causal_joint: factual cause out of range");

  CausalJointResult res;
  res.cause_card = cc;
  res.effect_card = ce;
  res.joint.assign(static_cast<size_t>(cc) * ce, kMaskedLogit);

  double hi = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < cc; ++a) {
    for (int b = 0; b < ce; ++b) {
      bool legal = (b <= factual_effect) || (a > factual_cause);
      double v = legal ? logits_cause[a] + logits_effect[b] : kMaskedLogit;
      res.joint[static_cast<size_t>(a) * ce + b] = v;
      hi = std::max(hi, v);
    }
  }
  // The factual pair is always legal, so some entry is workable.
  require(hi > kMaskedLogit / 2, "apply_causal_joint: every pair masked");

  double norm = 0.0;
  for (double& v : res.joint) {
    v = std::exp(v - hi);
    norm += v;
  }
  res.q_cause.assign(cc, 0.0);
  res.q_effect.assign(ce, 0.0);
  double best = -1.0;
  for (int a = 0; a < cc; ++a) {
    for (int b = 0; b < ce; ++b) {
      double& v = res.joint[static_cast<size_t>(a) * ce + b];
      v /= norm;
      res.q_cause[a] += v;
      res.q_effect[b] += v;
      if (v > best) {
        best = v;
        res.argmax_cause = a;
        res.argmax_effect = b;
      }
    }
  }
  return res;
}

int hamming_mutable(const DiscreteInstance& a, const DiscreteInstance& b, const ConstraintSet& cs) {
  require(a.size() == b.size() && static_cast<int>(a.size()) == cs.num_features(),
          "hamming_mutable: arity mismatch");
  int n = 0;
  for (int j = 0; j < cs.num_features(); ++j)
    if (!cs.immutable[j] && a[j] != b[j]) ++n;
  return n;
}

bool within_budget(const DiscreteInstance& candidate, const DiscreteInstance& factual,
                   const ConstraintSet& cs, double budget) {
  return static_cast<double>(hamming_mutable(candidate, factual, cs)) <= budget;
}

bool feasible(const DiscreteInstance& candidate, const DiscreteInstance& factual,
              const ConstraintSet& cs) {
  require(candidate.size() == factual.size() &&
              static_cast<int>(candidate.size()) == cs.num_features(),
          "feasible: arity mismatch");
  for (int j = 0; j < cs.num_features(); ++j) {
    if (cs.immutable[j] && candidate[j] != factual[j]) return false;
    if (cs.monotone[j] && candidate[j] < factual[j]) return false;
  }
  for (const CausalRule& r : cs.rules) {
    if (candidate[r.effect] > factual[r.effect] && !(candidate[r.cause] > factual[r.cause]))
      return false;
  }
  return true;
}

}  // namespace par
