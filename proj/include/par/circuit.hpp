#pragma once

#include <string>
#include <vector>

#include "par/numeric.hpp"

namespace par {

// Soft input: one distribution over categories per feature.
struct SoftInstance {
  std::vector<std::vector<double>> q;

  static SoftInstance from_one_hot(const DiscreteInstance& x, const std::vector<int>& cards);
  // Throws unless every block is nonnegative and sums to 1 within 1e-9.
  void check(const std::vector<int>& cards) const;
};

struct CircuitNode {
  enum class Kind { sum, product, leaf };
  Kind kind = Kind::leaf;
  std::vector<int> children;    // indices of earlier nodes
  std::vector<double> weights;  // sum nodes, aligned with children
  int feature = -1;             // leaf nodes
  std::vector<double> theta;    // leaf categorical parameters
};

struct ValidationIssue {
  int node = -1;
  std::string what;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

// Smooth, decomposable sum-product circuit over categorical features.
// Nodes are stored children-before-parents; the root is the designated output.
class Circuit {
 public:
  Circuit() = default;
  Circuit(std::vector<CircuitNode> nodes, int root, std::vector<int> cards);

  ValidationReport validate() const;
  void ensure_valid() const;  // throws Error listing violations

  // log p(x); -inf when the instance has zero mass.
  double log_likelihood(const DiscreteInstance& x) const;

  // log v(q) for the multilinear extension; equals log_likelihood on one-hot q.
  double soft_value(const SoftInstance& s) const;

  // d log v / d q_{j,c} via one downward pass. Throws when v(q) == 0.
  std::vector<std::vector<double>> soft_gradient(const SoftInstance& s) const;
  // Same quantity via category replacement, one upward pass per (j,c).
  std::vector<std::vector<double>> soft_gradient_by_replacement(const SoftInstance& s) const;

  DiscreteInstance sample(Rng& rng) const;

  int root() const { return root_; }
  const std::vector<CircuitNode>& nodes() const { return nodes_; }
  const std::vector<int>& cards() const { return cards_; }
  int num_features() const { return static_cast<int>(cards_.size()); }

  std::string to_text() const;
  static Circuit from_text(const std::string& text);
  void save(const std::string& path) const;
  static Circuit load(const std::string& path);

 private:
  std::vector<CircuitNode> nodes_;
  int root_ = -1;
  std::vector<int> cards_;
  mutable int valid_state_ = 0;  // 0 unknown, 1 ok, -1 bad

  std::vector<std::vector<int>> scopes() const;
  template <typename LeafLog>
  void upward(LeafLog&& leaf_log, std::vector<double>& out) const;
  std::vector<double> downward_log_derivatives(const std::vector<double>& logv) const;
};

}  // namespace par
