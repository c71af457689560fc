#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "par/local_search.hpp"

using namespace par;

namespace {

ConstraintSet make_cs(std::vector<int> cards, std::vector<int> immutable = {},
                      std::vector<int> monotone = {}, std::vector<CausalRule> rules = {}) {
  ConstraintSet cs;
  cs.cards = std::move(cards);
  int d = cs.num_features();
  cs.immutable.assign(d, false);
  cs.monotone.assign(d, false);
  cs.ordered.assign(d, true);
  for (int j : immutable) cs.immutable[j] = true;
  for (int j : monotone) cs.monotone[j] = true;
  cs.rules = std::move(rules);
  cs.validate();
  return cs;
}

Circuit product_circuit(const std::vector<int>& cards,
                        const std::vector<std::vector<double>>& thetas) {
  std::vector<CircuitNode> nodes;
  CircuitNode prod;
  prod.kind = CircuitNode::Kind::product;
  for (size_t j = 0; j < cards.size(); ++j) {
    CircuitNode leaf;
    leaf.kind = CircuitNode::Kind::leaf;
    leaf.feature = static_cast<int>(j);
    leaf.theta = thetas[j];
    nodes.push_back(std::move(leaf));
    prod.children.push_back(static_cast<int>(j));
  }
  nodes.push_back(std::move(prod));
  return Circuit(std::move(nodes), static_cast<int>(nodes.size()) - 1, cards);
}

// Single sigmoid unit over the one-hot encoding; weights indexed by
// (feature, category) through the domain offsets.
MlpModel linear_clf(const Domain& domain, const std::vector<std::pair<std::pair<int, int>, double>>& entries,
                    double bias) {
  MlpModel f;
  Layer l;
  l.w = Eigen::MatrixXd::Zero(1, domain.dim());
  for (const auto& [slot, wv] : entries) l.w(0, domain.offsets[slot.first] + slot.second) = wv;
  l.b.resize(1);
  l.b << bias;
  l.act = Activation::sigmoid;
  f.layers = {l};
  return f;
}

DiscreteInstance random_point(Rng& rng, const std::vector<int>& cards) {
  DiscreteInstance x(cards.size());
  for (size_t j = 0; j < cards.size(); ++j) x[j] = static_cast<int>(rng() % cards[j]);
  return x;
}

}  // namespace

TEST_CASE("repair leaves satisfied rules alone") {
  ConstraintSet cs = make_cs({3, 3}, {}, {}, {{1, 0}});
  DiscreteInstance factual = {0, 0};
  CHECK(repair_causality({1, 1}, factual, cs) == DiscreteInstance{1, 1});
  CHECK(repair_causality({0, 0}, factual, cs) == DiscreteInstance{0, 0});
}

TEST_CASE("repair clamps an effect whose cause did not increase") {
  ConstraintSet cs = make_cs({3, 3}, {}, {}, {{1, 0}});
  DiscreteInstance factual = {1, 1};
  CHECK(repair_causality({1, 2}, factual, cs) == DiscreteInstance{1, 1});
  CHECK(repair_causality({0, 2}, factual, cs) == DiscreteInstance{0, 1});
  // Decreases of the effect are not the rule's business.
  CHECK(repair_causality({1, 0}, factual, cs) == DiscreteInstance{1, 0});
}

TEST_CASE("repair reaches a fixed point across chained rules in any order") {
  DiscreteInstance factual = {0, 0, 0};
  DiscreteInstance c = {0, 1, 1};
  ConstraintSet forward = make_cs({2, 2, 2}, {}, {}, {{1, 0}, {2, 1}});
  ConstraintSet reversed = make_cs({2, 2, 2}, {}, {}, {{2, 1}, {1, 0}});
  CHECK(repair_causality(c, factual, forward) == DiscreteInstance{0, 0, 0});
  CHECK(repair_causality(c, factual, reversed) == DiscreteInstance{0, 0, 0});
}

TEST_CASE("repair is idempotent and only moves features toward the factual") {
  Rng rng(51);
  for (int t = 0; t < 500; ++t) {
    int d = 4 + static_cast<int>(rng() % 3);
    std::vector<int> cards(d, 0);
    for (int& v : cards) v = 2 + static_cast<int>(rng() % 3);
    std::vector<CausalRule> rules;
    for (int r = 0; r < 4; ++r) {
      int e = static_cast<int>(rng() % d), c = static_cast<int>(rng() % d);
      if (e != c) rules.push_back({e, c});
    }
    ConstraintSet cs = make_cs(cards, {}, {}, rules);
    DiscreteInstance factual = random_point(rng, cards);
    DiscreteInstance c = random_point(rng, cards);
    DiscreteInstance once = repair_causality(c, factual, cs);
    CHECK(repair_causality(once, factual, cs) == once);
    for (int j = 0; j < d; ++j) {
      bool kept = once[j] == c[j];
      bool clamped = once[j] == factual[j];
      CHECK((kept || clamped));
    }
    for (const CausalRule& r : cs.rules) {
      if (once[r.effect] > factual[r.effect]) CHECK(once[r.cause] > factual[r.cause]);
    }
  }
}

TEST_CASE("sparsify reverts redundant changes and keeps the candidate valid") {
  std::vector<int> cards = {3, 3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  // Accepts exactly when feature 0 sits at category 2.
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;

  DiscreteInstance factual = {0, 0, 0};
  DiscreteInstance c = sparsify({2, 1, 2}, factual, cs, f, domain, 3.0, nullptr, cfg);
  CHECK(c == DiscreteInstance{2, 0, 0});
  CHECK(classifier_score(f, c, domain) >= cfg.tau);
}

TEST_CASE("sparsify tries the smallest code delta first") {
  std::vector<int> cards = {4, 4, 4};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  // Valid while feature 1 or feature 2 stays off its factual category.
  MlpModel f = linear_clf(domain,
                          {{{1, 0}, -8.0}, {{1, 1}, 8.0}, {{1, 2}, 8.0}, {{1, 3}, 8.0},
                           {{2, 0}, -8.0}, {{2, 1}, 8.0}, {{2, 2}, 8.0}, {{2, 3}, 8.0}},
                          4.0);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0, 0};
  // Feature 1 moved by one code, feature 2 by two: the cheap revert goes first
  // and sticks, so the larger move is the one that survives.
  DiscreteInstance c = sparsify({0, 1, 2}, factual, cs, f, domain, 4.0, nullptr, cfg);
  CHECK(c == DiscreteInstance{0, 0, 2});
}

TEST_CASE("sparsify repairs downstream effects when reverting a cause") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards, {}, {}, {{1, 0}});
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {}, 5.0);  // accepts everything
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0};
  DiscreteInstance c = sparsify({1, 1}, factual, cs, f, domain, 4.0, nullptr, cfg);
  CHECK(c == factual);
}

TEST_CASE("sparsify never increases the change count and respects the budget") {
  Rng rng(52);
  std::vector<int> cards = {3, 4, 3, 4};
  ConstraintSet cs = make_cs(cards, {}, {1}, {{3, 0}});
  Domain domain = Domain::from_cards(cards);
  MlpModel f = MlpModel::make({domain.dim(), 6, 1}, {Activation::relu, Activation::sigmoid}, rng);
  RefineConfig cfg;
  for (int t = 0; t < 400; ++t) {
    DiscreteInstance factual = random_point(rng, cards);
    DiscreteInstance c = random_point(rng, cards);
    for (int j = 0; j < cs.num_features(); ++j)
      if (cs.monotone[j] && c[j] < factual[j]) c[j] = factual[j];
    c = repair_causality(std::move(c), factual, cs);
    if (classifier_score(f, c, domain) < cfg.tau) continue;
    int before = hamming_mutable(c, factual, cs);
    DiscreteInstance out = sparsify(c, factual, cs, f, domain, 4.0, nullptr, cfg);
    CHECK(hamming_mutable(out, factual, cs) <= before);
    CHECK(feasible(out, factual, cs));
    CHECK(classifier_score(f, out, domain) >= cfg.tau);
  }
}

TEST_CASE("the likelihood guard blocks reverts that fall off the data manifold") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {}, 5.0);
  Circuit p_plus = product_circuit(cards, {{0.90, 0.005, 0.095}, {0.5, 0.25, 0.25}});

  DiscreteInstance factual = {1, 1};
  DiscreteInstance c = {0, 0};

  RefineConfig open;
  CHECK(sparsify(c, factual, cs, f, domain, 4.0, &p_plus, open) == factual);

  RefineConfig guarded;
  guarded.delta_max = 1.0;
  // Reverting feature 0 to its factual category costs log(0.90 / 0.005) nats,
  // far past the allowance; reverting feature 1 costs log 2 and goes through.
  CHECK(sparsify(c, factual, cs, f, domain, 4.0, &p_plus, guarded) == DiscreteInstance{0, 1});
}

TEST_CASE("refine sparsifies candidates that already clear the threshold") {
  std::vector<int> cards = {3, 3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0, 0};
  DiscreteInstance out = refine({2, 1, 2}, factual, cs, f, domain, nullptr, cfg);
  CHECK(out == DiscreteInstance{2, 0, 0});
}

TEST_CASE("refine restores immutable features before anything else") {
  std::vector<int> cards = {3, 3, 3};
  ConstraintSet cs = make_cs(cards, {1});
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0, 0};
  DiscreteInstance out = refine({2, 2, 0}, factual, cs, f, domain, nullptr, cfg);
  CHECK(out == DiscreteInstance{2, 0, 0});
}

TEST_CASE("an infeasible candidate restarts from the factual and retries one flip") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards, {}, {1});
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;
  // The candidate pushed the monotone feature below its factual category, so
  // repair cannot rescue it; the search restarts at the factual and finds the
  // single flip that crosses the threshold.
  DiscreteInstance factual = {0, 1};
  DiscreteInstance out = refine({1, 0}, factual, cs, f, domain, nullptr, cfg);
  CHECK(out == DiscreteInstance{2, 1});
  CHECK(classifier_score(f, out, domain) >= cfg.tau);
}

TEST_CASE("a one flip fix is found within the candidate's own budget") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0};
  DiscreteInstance out = refine({1, 0}, factual, cs, f, domain, nullptr, cfg);
  CHECK(out == DiscreteInstance{2, 0});
}

TEST_CASE("a zero change candidate cannot buy any fix") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -6.0}, {{0, 1}, -6.0}, {{0, 2}, 6.0}}, 0.0);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0};
  // Hamming budget is taken from the candidate itself, so starting at the
  // factual leaves no room to move.
  CHECK(refine(factual, factual, cs, f, domain, nullptr, cfg) == factual);
}

TEST_CASE("when the threshold is unreachable refine returns the best score") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {{{0, 0}, -2.0}, {{0, 2}, 1.0}}, -1.5);
  RefineConfig cfg;
  DiscreteInstance factual = {0, 0};
  DiscreteInstance out = refine({1, 0}, factual, cs, f, domain, nullptr, cfg);
  CHECK(out == DiscreteInstance{2, 0});
  CHECK(classifier_score(f, out, domain) < cfg.tau);
}

TEST_CASE("score ties in the fallback break toward higher likelihood") {
  std::vector<int> cards = {3, 3};
  ConstraintSet cs = make_cs(cards);
  Domain domain = Domain::from_cards(cards);
  MlpModel f = linear_clf(domain, {}, std::log(0.3 / 0.7));  // constant 0.3
  Circuit p_plus = product_circuit(cards, {{0.2, 0.3, 0.5}, {0.6, 0.3, 0.1}});
  RefineConfig cfg;
  DiscreteInstance factual = {1, 0};
  DiscreteInstance out = refine({1, 1}, factual, cs, f, domain, &p_plus, cfg);
  CHECK(out == factual);
}

TEST_CASE("refine preserves feasibility and the initial change budget") {
  Rng rng(53);
  std::uniform_int_distribution<int> card_pick(2, 4);
  for (int t = 0; t < 1500; ++t) {
    int d = 3 + static_cast<int>(rng() % 3);
    std::vector<int> cards(d);
    for (int& c : cards) c = card_pick(rng);
    std::vector<int> immutable, monotone;
    for (int j = 0; j < d; ++j) {
      if (rng() % 6 == 0) immutable.push_back(j);
      else if (rng() % 4 == 0) monotone.push_back(j);
    }
    std::vector<CausalRule> rules;
    for (int r = 0; r < 2; ++r) {
      int e = static_cast<int>(rng() % d), c = static_cast<int>(rng() % d);
      if (e != c) rules.push_back({e, c});
    }
    ConstraintSet cs = make_cs(cards, immutable, monotone, rules);
    Domain domain = Domain::from_cards(cards);
    MlpModel f = MlpModel::make({domain.dim(), 5, 1}, {Activation::relu, Activation::sigmoid}, rng);
    RefineConfig cfg;
    DiscreteInstance factual = random_point(rng, cards);
    DiscreteInstance c0 = random_point(rng, cards);
    int budget = hamming_mutable(c0, factual, cs);
    DiscreteInstance out = refine(c0, factual, cs, f, domain, nullptr, cfg);
    CHECK(feasible(out, factual, cs));
    CHECK(hamming_mutable(out, factual, cs) <= budget);
  }
}
