#pragma once

#include <span>
#include <utility>
#include <vector>

#include "par/discretizer.hpp"
#include "par/numeric.hpp"
#include "par/schema.hpp"

namespace par {

// Sentinel for masked-out category logits. Large and negative so masked
// entries carry no mass after a softmax.
constexpr double kMaskedLogit = -1e9;

struct CausalRule {
  int effect = -1;  // increasing the effect requires increasing the cause
  int cause = -1;
};

struct ConstraintSet {
  std::vector<int> cards;
  std::vector<bool> immutable;
  std::vector<bool> monotone;  // non-decreasing features
  std::vector<bool> ordered;   // codes carry an order (everything but unordered categoricals)
  std::vector<CausalRule> rules;
  double budget = 4.0;

  int num_features() const { return static_cast<int>(cards.size()); }
  std::vector<int> mutable_features() const;
  // Rules whose endpoints are both mutable, grouped into connected components
  // of shared features; each group lists its member features causes-first.
  struct JointGroup {
    std::vector<int> members;
    std::vector<CausalRule> rules;
  };
  std::vector<JointGroup> joint_groups() const;
  void validate() const;
};

ConstraintSet build_constraints(const Schema& schema, const Discretizer& disc, double budget);

// Zeroes out categories below the factual code.
void mask_monotone(std::span<double> logits, int factual);
// Zeroes out categories above the factual code (effect of an immutable cause).
void mask_causal_clamp(std::span<double> logits, int factual);

// Joint softmax over (cause, effect) category pairs with illegal pairs
// removed: a pair is illegal when the effect increases while the cause does
// not. Marginals and the row-major joint argmax are returned.
struct CausalJointResult {
  int cause_card = 0;
  int effect_card = 0;
  std::vector<double> joint;  // cause-major probabilities
  std::vector<double> q_cause;
  std::vector<double> q_effect;
  int argmax_cause = -1;
  int argmax_effect = -1;

  double at(int a_cause, int a_effect) const { return joint[a_cause * effect_card + a_effect]; }
};
CausalJointResult apply_causal_joint(std::span<const double> logits_effect,
                                     std::span<const double> logits_cause, int factual_effect,
                                     int factual_cause);

int hamming_mutable(const DiscreteInstance& a, const DiscreteInstance& b, const ConstraintSet& cs);
bool within_budget(const DiscreteInstance& candidate, const DiscreteInstance& factual,
                   const ConstraintSet& cs, double budget);
// Immutables untouched, monotones non-decreasing, causal implications hold.
bool feasible(const DiscreteInstance& candidate, const DiscreteInstance& factual,
              const ConstraintSet& cs);

}  // namespace par
