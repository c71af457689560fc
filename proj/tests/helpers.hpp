#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "par/circuit.hpp"
#include "par/numeric.hpp"

namespace testutil {

using par::Circuit;
using par::CircuitNode;
using par::DiscreteInstance;
using par::Rng;
using par::SoftInstance;

inline std::vector<double> random_simplex(Rng& rng, int n, double floor = 0.02) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) s += (x = u(rng));
  for (double& x : v) x /= s;
  return v;
}

// Random smooth, decomposable circuit over `cards`; children appear before
// parents so the result always validates.
class CircuitBuilder {
 public:
  CircuitBuilder(const std::vector<int>& cards, Rng& rng, int max_depth = 4)
      : cards_(cards), rng_(rng), max_depth_(max_depth) {}

  Circuit build() {
    std::vector<int> scope(cards_.size());
    std::iota(scope.begin(), scope.end(), 0);
    int root = emit(scope, 0);
    return Circuit(std::move(nodes_), root, cards_);
  }

 private:
  int emit_leaf(int feature) {
    CircuitNode n;
    n.kind = CircuitNode::Kind::leaf;
    n.feature = feature;
    n.theta = random_simplex(rng_, cards_[feature]);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int emit(const std::vector<int>& scope, int depth) {
    if (scope.size() == 1) {
      if (depth >= max_depth_ || coin(0.6)) return emit_leaf(scope[0]);
      return emit_sum(scope, depth);
    }
    if (depth >= max_depth_ || coin(0.5)) return emit_product(scope, depth);
    return emit_sum(scope, depth);
  }

  int emit_sum(const std::vector<int>& scope, int depth) {
    int k = 2 + static_cast<int>(rng_() % 2);
    CircuitNode n;
    n.kind = CircuitNode::Kind::sum;
    n.weights = random_simplex(rng_, k);
    for (int i = 0; i < k; ++i)
      n.children.push_back(scope.size() == 1 ? emit_leaf(scope[0])
                                             : emit_product(scope, depth + 1));
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int emit_product(const std::vector<int>& scope, int depth) {
    if (scope.size() == 1) return coin(0.5) || depth >= max_depth_ ? emit_leaf(scope[0])
                                                                   : emit_sum(scope, depth);
    std::vector<int> shuffled = scope;
    std::shuffle(shuffled.begin(), shuffled.end(), rng_);
    size_t cut = 1 + rng_() % (shuffled.size() - 1);
    std::vector<int> left(shuffled.begin(), shuffled.begin() + static_cast<long>(cut));
    std::vector<int> right(shuffled.begin() + static_cast<long>(cut), shuffled.end());
    CircuitNode n;
    n.kind = CircuitNode::Kind::product;
    n.children.push_back(emit(left, depth + 1));
    n.children.push_back(emit(right, depth + 1));
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }

  std::vector<int> cards_;
  Rng& rng_;
  int max_depth_;
  std::vector<CircuitNode> nodes_;
};

inline Circuit random_circuit(Rng& rng, int max_features = 4, int max_cats = 4) {
  int d = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_features));
  std::vector<int> cards(d);
  for (int& c : cards) c = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_cats - 1));
  return CircuitBuilder(cards, rng).build();
}

inline std::vector<DiscreteInstance> enumerate_all(const std::vector<int>& cards) {
  std::vector<DiscreteInstance> out;
  DiscreteInstance x(cards.size(), 0);
  while (true) {
    out.push_back(x);
    size_t j = 0;
    while (j < cards.size() && ++x[j] == cards[j]) x[j++] = 0;
    if (j == cards.size()) break;
  }
  return out;
}

inline SoftInstance random_soft(Rng& rng, const std::vector<int>& cards) {
  SoftInstance s;
  for (int c : cards) s.q.push_back(random_simplex(rng, c));
  return s;
}

// Central difference of f along a direction, for gradients of scalar maps.
inline double central_diff(const std::function<double(double)>& f, double h = 1e-6) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  double denom = std::max({std::abs(got), std::abs(want), 1e-10});
  return std::abs(got - want) / denom;
}

}  // namespace testutil
