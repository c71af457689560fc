#include "par/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "par/numeric.hpp"

namespace par {

using nlohmann::json;

std::string feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::ordered_categorical: return "ordered_categorical";
    case FeatureKind::unordered_categorical: return "unordered_categorical";
    case FeatureKind::discrete_numeric: return "discrete_numeric";
    case FeatureKind::binned_numeric: return "binned_numeric";
    case FeatureKind::auto_numeric: return "numeric";
  }
  fail("feature_kind_name: bad kind");
}

FeatureKind feature_kind_from_name(const std::string& s) {
  if (s == "ordered_categorical") return FeatureKind::ordered_categorical;
  if (s == "unordered_categorical" || s == "categorical") return FeatureKind::unordered_categorical;
  if (s == "discrete_numeric") return FeatureKind::discrete_numeric;
  if (s == "binned_numeric") return FeatureKind::binned_numeric;
  if (s == "numeric") return FeatureKind::auto_numeric;
  fail("schema: unknown feature kind '" + s + "'");
}

int Schema::feature_index(const std::string& fname) const {
  for (size_t i = 0; i < features.size(); ++i)
    if (features[i].name == fname) return static_cast<int>(i);
  return -1;
}

void Schema::validate() const {
  require(!features.empty(), "schema: no features");
  require(!label_column.empty(), "schema: missing label column");
  std::set<std::string> seen;
  for (const auto& f : features) {
    require(!f.name.empty(), "schema: feature with empty name");
    require(seen.insert(f.name).second, "schema: duplicate feature '" + f.name + "'");
    require(f.name != label_column, "schema: label column listed as feature");
    if (f.kind == FeatureKind::ordered_categorical)
      require(f.order.size() >= 2, "schema: ordered feature '" + f.name + "' needs an explicit order");
    if (!f.order.empty()) {
      std::set<std::string> cats(f.order.begin(), f.order.end());
      require(cats.size() == f.order.size(), "schema: duplicate category in order of '" + f.name + "'");
    }
  }
  for (const auto& r : causal_rules) {
    require(feature_index(r.effect) >= 0, "schema: causal rule references unknown effect '" + r.effect + "'");
    require(feature_index(r.cause) >= 0, "schema: causal rule references unknown cause '" + r.cause + "'");
    require(r.effect != r.cause, "schema: causal rule with effect == cause");
  }
}

Schema Schema::from_json_text(const std::string& text) {
  json doc = json::parse(text);
  Schema s;
  s.name = doc.value("name", "");
  const auto& label = doc.at("label");
  s.label_column = label.at("column").get<std::string>();
  s.positive_label = label.at("positive").get<std::string>();
  for (const auto& jf : doc.at("features")) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    f.kind = feature_kind_from_name(jf.value("kind", "numeric"));
    if (jf.contains("order")) f.order = jf.at("order").get<std::vector<std::string>>();
    f.immutable = jf.value("immutable", false);
    f.monotone_nondecreasing = jf.value("monotone_nondecreasing", false);
    s.features.push_back(std::move(f));
  }
  if (doc.contains("causal_rules")) {
    for (const auto& jr : doc.at("causal_rules"))
      s.causal_rules.push_back({jr.at("effect").get<std::string>(), jr.at("cause").get<std::string>()});
  }
  s.validate();
  return s;
}

std::string Schema::to_json_text() const {
  json doc;
  doc["name"] = name;
  doc["label"] = {{"column", label_column}, {"positive", positive_label}};
  doc["features"] = json::array();
  for (const auto& f : features) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = feature_kind_name(f.kind);
    if (!f.order.empty()) jf["order"] = f.order;
    if (f.immutable) jf["immutable"] = true;
    if (f.monotone_nondecreasing) jf["monotone_nondecreasing"] = true;
    doc["features"].push_back(jf);
  }
  doc["causal_rules"] = json::array();
  for (const auto& r : causal_rules)
    doc["causal_rules"].push_back({{"effect", r.effect}, {"cause", r.cause}});
  return doc.dump(2);
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "schema: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_text(ss.str());
  } catch (const json::exception& e) {
    fail("schema: failed to parse " + path + ": " + e.what());
  }
}

void Schema::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "schema: cannot write " + path);
  out << to_json_text() << "\n";
}

}  // namespace par
