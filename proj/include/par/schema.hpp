#pragma once

#include <string>
#include <vector>

namespace par {

// Feature typing used by the discretizer. auto_numeric resolves to
// discrete_numeric or binned_numeric at fit time based on cardinality.
enum class FeatureKind {
  ordered_categorical,
  unordered_categorical,
  discrete_numeric,
  binned_numeric,
  auto_numeric,
};

std::string feature_kind_name(FeatureKind k);
FeatureKind feature_kind_from_name(const std::string& s);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::auto_numeric;
  // Category order for ordered_categorical (low to high).
  std::vector<std::string> order;
  bool immutable = false;
  bool monotone_nondecreasing = false;
};

// An increase of `effect` requires an increase of `cause`.
struct CausalRuleSpec {
  std::string effect;
  std::string cause;
};

struct Schema {
  std::string name;
  std::string label_column;
  std::string positive_label;
  std::vector<FeatureSpec> features;
  std::vector<CausalRuleSpec> causal_rules;

  int feature_index(const std::string& name) const;  // -1 when absent
  // Checks internal consistency: unique names, rules referencing known
  // features, explicit order present where required. Throws on violation.
  void validate() const;

  static Schema load(const std::string& path);
  static Schema from_json_text(const std::string& text);
  std::string to_json_text() const;
  void save(const std::string& path) const;
};

}  // namespace par
