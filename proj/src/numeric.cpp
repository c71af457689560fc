#include "par/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace par {

void fail(const std::string& msg) { throw Error(msg); }

double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

double mean_of(std::span<const double> xs) {
  require(!xs.empty(), "mean_of: empty input");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median_of(std::vector<double> xs) {
  require(!xs.empty(), "median_of: empty input");
  std::sort(xs.begin(), xs.end());
  size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Domain Domain::from_cards(std::vector<int> cards) {
  Domain d;
  d.cards = std::move(cards);
  d.offsets.resize(d.cards.size());
  int at = 0;
  for (size_t j = 0; j < d.cards.size(); ++j) {
    require(d.cards[j] >= 1, "Domain: cardinality must be >= 1");
    d.offsets[j] = at;
    at += d.cards[j];
  }
  d.total = at;
  return d;
}

std::vector<double> one_hot(const DiscreteInstance& x, const Domain& d) {
  require(x.size() == d.cards.size(), "one_hot: instance arity mismatch");
  std::vector<double> out(d.total, 0.0);
  for (size_t j = 0; j < x.size(); ++j) {
    require(x[j] >= 0 && x[j] < d.cards[j],
            "one_hot: code out of range at feature " + std::to_string(j));
    out[d.offsets[j] + x[j]] = 1.0;
  }
  return out;
}

int hamming(const DiscreteInstance& a, const DiscreteInstance& b) {
  require(a.size() == b.size(), "hamming: arity mismatch");
  int n = 0;
  for (size_t j = 0; j < a.size(); ++j) n += (a[j] != b[j]) ? 1 : 0;
  return n;
}

}  // namespace par
