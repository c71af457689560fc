#include "par/learnspn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

namespace par {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

struct Builder {
  const std::vector<DiscreteInstance>& rows;
  const std::vector<int>& cards;
  const LearnSpnOptions& opt;
  Rng& rng;
  std::vector<CircuitNode> nodes;

  int add(CircuitNode n) {
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  int make_leaf(const std::vector<int>& row_idx, int feature) {
    CircuitNode n;
    n.kind = CircuitNode::Kind::leaf;
    n.feature = feature;
    n.theta.assign(cards[feature], 0.0);
    for (int r : row_idx) n.theta[rows[r][feature]] += 1.0;
    double denom = static_cast<double>(row_idx.size()) + opt.leaf_alpha * cards[feature];
    for (double& t : n.theta) t = (t + opt.leaf_alpha) / denom;
    return add(std::move(n));
  }

  int factorize(const std::vector<int>& row_idx, const std::vector<int>& scope) {
    if (scope.size() == 1) return make_leaf(row_idx, scope[0]);
    CircuitNode n;
    n.kind = CircuitNode::Kind::product;
    for (int j : scope) n.children.push_back(make_leaf(row_idx, j));
    return add(std::move(n));
  }

  // Connected components of the dependence graph (edge when the G-test
  // rejects independence at the configured significance).
  std::vector<std::vector<int>> dependence_components(const std::vector<int>& row_idx,
                                                      const std::vector<int>& scope) {
    UnionFind uf(static_cast<int>(scope.size()));
    for (size_t a = 0; a < scope.size(); ++a) {
      for (size_t b = a + 1; b < scope.size(); ++b) {
        double p = g_test_p_value(rows, row_idx, scope[a], scope[b], cards);
        if (p <= opt.independence_alpha) uf.unite(static_cast<int>(a), static_cast<int>(b));
      }
    }
    std::vector<std::vector<int>> comps;
    std::vector<int> comp_of(scope.size(), -1);
    for (size_t a = 0; a < scope.size(); ++a) {
      int r = uf.find(static_cast<int>(a));
      if (comp_of[r] < 0) {
        comp_of[r] = static_cast<int>(comps.size());
        comps.emplace_back();
      }
      comps[comp_of[r]].push_back(scope[a]);
    }
    return comps;
  }

  // Seeded 2-means over one-hot encodings restricted to the scope. Returns
  // per-row cluster ids, or an empty vector when no proper split exists.
  std::vector<int> cluster_rows(const std::vector<int>& row_idx, const std::vector<int>& scope) {
    int dim = 0;
    std::vector<int> offs(scope.size());
    for (size_t a = 0; a < scope.size(); ++a) {
      offs[a] = dim;
      dim += cards[scope[a]];
    }
    auto embed = [&](int r, std::vector<double>& v) {
      std::fill(v.begin(), v.end(), 0.0);
      for (size_t a = 0; a < scope.size(); ++a) v[offs[a] + rows[r][scope[a]]] = 1.0;
    };

    size_t n = row_idx.size();
    std::vector<double> point(dim);
    std::vector<int> best_assign;
    double best_inertia = std::numeric_limits<double>::infinity();
    std::uniform_int_distribution<size_t> pick(0, n - 1);

    for (int restart = 0; restart < opt.kmeans_restarts; ++restart) {
      size_t ia = pick(rng), ib = pick(rng);
      std::vector<std::vector<double>> mean(2, std::vector<double>(dim, 0.0));
      embed(row_idx[ia], mean[0]);
      embed(row_idx[ib], mean[1]);
      std::vector<int> assign(n, 0);
      double inertia = 0.0;
      for (int iter = 0; iter < opt.kmeans_iters; ++iter) {
        inertia = 0.0;
        bool moved = false;
        for (size_t i = 0; i < n; ++i) {
          embed(row_idx[i], point);
          double d0 = 0.0, d1 = 0.0;
          for (int t = 0; t < dim; ++t) {
            double a = point[t] - mean[0][t];
            double b = point[t] - mean[1][t];
            d0 += a * a;
            d1 += b * b;
          }
          int c = (d0 <= d1) ? 0 : 1;
          if (c != assign[i]) moved = true;
          assign[i] = c;
          inertia += (c == 0) ? d0 : d1;
        }
        size_t n0 = static_cast<size_t>(std::count(assign.begin(), assign.end(), 0));
        if (n0 == 0 || n0 == n) break;
        for (auto& m : mean) std::fill(m.begin(), m.end(), 0.0);
        std::vector<size_t> cnt(2, 0);
        for (size_t i = 0; i < n; ++i) {
          ++cnt[assign[i]];
          for (size_t a = 0; a < scope.size(); ++a)
            mean[assign[i]][offs[a] + rows[row_idx[i]][scope[a]]] += 1.0;
        }
        for (int c = 0; c < 2; ++c)
          for (double& m : mean[c]) m /= static_cast<double>(cnt[c]);
        if (!moved) break;
      }
      size_t n0 = static_cast<size_t>(std::count(assign.begin(), assign.end(), 0));
      if (n0 == 0 || n0 == n) continue;
      if (inertia < best_inertia) {
        best_inertia = inertia;
        best_assign = assign;
      }
    }
    return best_assign;
  }

  int build(const std::vector<int>& row_idx, const std::vector<int>& scope) {
    if (scope.size() == 1) return make_leaf(row_idx, scope[0]);
    if (static_cast<int>(row_idx.size()) < opt.min_rows ||
        static_cast<int>(scope.size()) < opt.min_cols)
      return factorize(row_idx, scope);

    auto comps = dependence_components(row_idx, scope);
    if (comps.size() > 1) {
      CircuitNode n;
      n.kind = CircuitNode::Kind::product;
      for (const auto& comp : comps) n.children.push_back(build(row_idx, comp));
      return add(std::move(n));
    }

    auto assign = cluster_rows(row_idx, scope);
    if (assign.empty()) return factorize(row_idx, scope);

    std::vector<std::vector<int>> parts(2);
    for (size_t i = 0; i < assign.size(); ++i) parts[assign[i]].push_back(row_idx[i]);
    CircuitNode n;
    n.kind = CircuitNode::Kind::sum;
    double total = static_cast<double>(row_idx.size());
    for (int c = 0; c < 2; ++c) {
      n.children.push_back(build(parts[c], scope));
      n.weights.push_back(std::max(static_cast<double>(parts[c].size()) / total, opt.weight_floor));
    }
    double wsum = n.weights[0] + n.weights[1];
    for (double& w : n.weights) w /= wsum;
    return add(std::move(n));
  }
};

}  // namespace

double g_test_p_value(const std::vector<DiscreteInstance>& rows, const std::vector<int>& row_idx,
                      int j1, int j2, const std::vector<int>& cards) {
  int c1 = cards[j1], c2 = cards[j2];
  std::vector<double> table(static_cast<size_t>(c1) * c2, 0.0);
  std::vector<double> rsum(c1, 0.0), csum(c2, 0.0);
  for (int r : row_idx) {
    int a = rows[r][j1], b = rows[r][j2];
    table[static_cast<size_t>(a) * c2 + b] += 1.0;
    rsum[a] += 1.0;
    csum[b] += 1.0;
  }
  double n = static_cast<double>(row_idx.size());
  if (n == 0.0) return 1.0;
  double g = 0.0;
  for (int a = 0; a < c1; ++a) {
    for (int b = 0; b < c2; ++b) {
      double o = table[static_cast<size_t>(a) * c2 + b];
      if (o <= 0.0) continue;
      g += 2.0 * o * std::log(o * n / (rsum[a] * csum[b]));
    }
  }
  g = std::max(g, 0.0);
  int nz1 = static_cast<int>(std::count_if(rsum.begin(), rsum.end(), [](double v) { return v > 0; }));
  int nz2 = static_cast<int>(std::count_if(csum.begin(), csum.end(), [](double v) { return v > 0; }));
  int df = (nz1 - 1) * (nz2 - 1);
  if (df <= 0) return 1.0;
  return boost::math::gamma_q(static_cast<double>(df) / 2.0, g / 2.0);
}

Circuit learn_structure(const std::vector<DiscreteInstance>& rows, const std::vector<int>& cards,
                        const LearnSpnOptions& opt, Rng& rng) {
  require(!rows.empty(), "learn_structure: no training rows");
  require(!cards.empty(), "learn_structure: no features");
  for (const auto& r : rows) {
    require(r.size() == cards.size(), "learn_structure: row arity mismatch");
    for (size_t j = 0; j < r.size(); ++j)
      require(r[j] >= 0 && r[j] < cards[j], "learn_structure: code out of range");
  }
  Builder b{rows, cards, opt, rng, {}};
  std::vector<int> all(rows.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> scope(cards.size());
  std::iota(scope.begin(), scope.end(), 0);
  int root = b.build(all, scope);
  Circuit c(std::move(b.nodes), root, cards);
  c.ensure_valid();
  return c;
}

}  // namespace par
