#pragma once

#include <optional>
#include <string>
#include <vector>

#include "par/csv.hpp"
#include "par/numeric.hpp"
#include "par/schema.hpp"

namespace par {

struct DiscretizerOptions {
  int bins_per_numeric = 10;
  // Numeric features with at most this many unique training values are kept
  // as discrete codes instead of being binned.
  int discrete_cardinality_threshold = 25;
};

// Per-feature fitted encoding. Exactly one of vocab / values / edges drives
// the code mapping, selected by `kind` (never auto after fitting).
struct FeatureDomain {
  std::string name;
  FeatureKind kind = FeatureKind::unordered_categorical;
  std::vector<std::string> vocab;   // categorical categories in code order
  int na_code = -1;                 // reserved fallback code (unordered categorical only)
  std::vector<double> values;       // discrete_numeric: sorted unique training values
  std::vector<double> edges;        // binned_numeric: strictly increasing bin edges
  std::vector<double> representatives;  // numeric kinds: raw representative per code
  bool ordered = false;

  int cardinality() const;
};

struct TransformStats {
  long total_cells = 0;
  long out_of_domain_cells = 0;
  std::vector<long> per_feature_out_of_domain;
  std::vector<uint8_t> row_has_fallback;
};

struct BinDiagnostics {
  double coverage = 0.0;   // fraction of in-domain cells
  double fidelity = 0.0;   // fraction of rows with every cell in-domain
  long rows = 0;
  std::vector<long> per_feature_out_of_domain;
};

// Maps raw tabular rows to per-feature ordinal codes. Fitted on the training
// split only; transform never fails on unseen values, it falls back and flags.
class Discretizer {
 public:
  static Discretizer fit(const Table& train, const Schema& schema, const DiscretizerOptions& opt);

  std::vector<DiscreteInstance> transform(const Table& t, TransformStats* stats = nullptr) const;
  // 0/1 labels from the schema's label column.
  std::vector<int> labels(const Table& t) const;

  // In-domain indicators over a raw held-out table.
  BinDiagnostics diagnostics(const Table& test) const;

  const Domain& domain() const { return domain_; }
  const std::vector<FeatureDomain>& features() const { return feats_; }
  const Schema& schema() const { return schema_; }

  // Raw-value representative of a code (bin median for binned numerics);
  // NaN for categorical features.
  double representative(int feature, int code) const;
  // Human-readable rendering of a code.
  std::string display_value(int feature, int code) const;

  std::string to_json_text() const;
  static Discretizer from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static Discretizer load(const std::string& path);

 private:
  Schema schema_;
  DiscretizerOptions opt_;
  std::vector<FeatureDomain> feats_;
  Domain domain_;

  int encode_cell(int feature, const std::string& raw, bool* in_domain) const;
};

bool is_missing_token(const std::string& raw);
std::optional<double> parse_double(const std::string& raw);

}  // namespace par
