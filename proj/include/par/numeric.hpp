#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace par {

using Rng = std::mt19937_64;

// Discretized instance: one ordinal code per feature.
using DiscreteInstance = std::vector<int>;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// log(sum_i exp(xs[i])); returns -inf for an empty span or all -inf inputs.
double log_sum_exp(std::span<const double> xs);

double mean_of(std::span<const double> xs);
// Sample standard deviation (n-1 denominator); 0 when fewer than two values.
double sample_std(std::span<const double> xs);
double median_of(std::vector<double> xs);

// Feature block layout over the concatenated one-hot space.
struct Domain {
  std::vector<int> cards;
  std::vector<int> offsets;
  int total = 0;

  static Domain from_cards(std::vector<int> cards);
  int size() const { return static_cast<int>(cards.size()); }
  int dim() const { return total; }
};

std::vector<double> one_hot(const DiscreteInstance& x, const Domain& d);

// Hamming distance over all features.
int hamming(const DiscreteInstance& a, const DiscreteInstance& b);

}  // namespace par
