#include "par/discretizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace par {

using nlohmann::json;

namespace {

constexpr const char* kNaToken = "__na__";

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Lower nearest-rank quantile edges at k/bins, k = 1..bins-1. Edges are
// training values, deduplicated, and edges at the maximum are dropped so
// every bin contains at least one training value.
std::vector<double> quantile_edges(std::vector<double> sorted, int bins) {
  std::vector<double> edges;
  if (sorted.empty() || bins < 2) return edges;
  size_t n = sorted.size();
  for (int k = 1; k < bins; ++k) {
    size_t idx = static_cast<size_t>(std::floor(static_cast<double>(n - 1) * k / bins));
    double e = sorted[idx];
    if (e >= sorted.back()) continue;
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

int bin_index(const std::vector<double>& edges, double v) {
  // Bin k covers (edges[k-1], edges[k]]; strictly-less count gives the index.
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
}

double median_sorted(const std::vector<double>& xs) {
  size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::string format_number(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

bool is_missing_token(const std::string& raw) {
  std::string s = lower(raw);
  return s.empty() || s == "na" || s == "n/a" || s == "nan" || s == "?";
}

std::optional<double> parse_double(const std::string& raw) {
  if (raw.empty()) return std::nullopt;
  const char* begin = raw.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') return std::nullopt;
  return v;
}

int FeatureDomain::cardinality() const {
  switch (kind) {
    case FeatureKind::ordered_categorical:
    case FeatureKind::unordered_categorical:
      return static_cast<int>(vocab.size());
    case FeatureKind::discrete_numeric:
      return static_cast<int>(values.size());
    case FeatureKind::binned_numeric:
      return static_cast<int>(edges.size()) + 1;
    case FeatureKind::auto_numeric:
      break;
  }
  fail("FeatureDomain: unresolved kind");
}

Discretizer Discretizer::fit(const Table& train, const Schema& schema, const DiscretizerOptions& opt) {
  schema.validate();
  require(train.nrows() > 0, "discretizer: empty training table");
  require(opt.bins_per_numeric >= 2, "discretizer: bins_per_numeric must be >= 2");

  Discretizer d;
  d.schema_ = schema;
  d.opt_ = opt;

  std::set<std::string> constrained;
  for (const auto& f : schema.features)
    if (f.monotone_nondecreasing) constrained.insert(f.name);
  for (const auto& r : schema.causal_rules) {
    constrained.insert(r.effect);
    constrained.insert(r.cause);
  }

  for (const auto& spec : schema.features) {
    int col = train.col_index(spec.name);
    require(col >= 0, "discretizer: column '" + spec.name + "' missing from training table");

    std::vector<std::string> raw;
    raw.reserve(train.nrows());
    for (const auto& row : train.rows) raw.push_back(row[col]);

    FeatureDomain fd;
    fd.name = spec.name;
    FeatureKind kind = spec.kind;

    if (kind == FeatureKind::unordered_categorical && constrained.count(spec.name)) {
      // Constraint roles need an ordering; coerce to numeric or halt.
      for (const auto& cell : raw) {
        if (is_missing_token(cell)) continue;
        require(parse_double(cell).has_value(),
                "discretizer: feature '" + spec.name +
                    "' participates in ordering constraints but value '" + cell +
                    "' is not numeric; declare an explicit order or fix the data");
      }
      kind = FeatureKind::auto_numeric;
    }

    if (kind == FeatureKind::auto_numeric || kind == FeatureKind::binned_numeric ||
        kind == FeatureKind::discrete_numeric) {
      std::vector<double> vals;
      vals.reserve(raw.size());
      for (const auto& cell : raw) {
        if (is_missing_token(cell)) continue;
        auto v = parse_double(cell);
        require(v.has_value(), "discretizer: non-numeric value '" + cell + "' in numeric feature '" +
                                   spec.name + "'");
        require(std::isfinite(*v), "discretizer: non-finite value in numeric feature '" + spec.name + "'");
        vals.push_back(*v);
      }
      require(!vals.empty(), "discretizer: feature '" + spec.name + "' has no usable training values");
      std::sort(vals.begin(), vals.end());
      std::vector<double> uniq(vals);
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

      if (kind == FeatureKind::auto_numeric)
        kind = (static_cast<int>(uniq.size()) <= opt.discrete_cardinality_threshold)
                   ? FeatureKind::discrete_numeric
                   : FeatureKind::binned_numeric;

      if (kind == FeatureKind::binned_numeric) {
        fd.edges = quantile_edges(vals, opt.bins_per_numeric);
        if (fd.edges.empty()) {
          kind = FeatureKind::discrete_numeric;  // degenerate quantiles
        } else {
          int cards = static_cast<int>(fd.edges.size()) + 1;
          std::vector<std::vector<double>> per_bin(cards);
          for (double v : vals) per_bin[bin_index(fd.edges, v)].push_back(v);
          for (int b = 0; b < cards; ++b) {
            require(!per_bin[b].empty(), "discretizer: internal error, empty bin");
            fd.representatives.push_back(median_sorted(per_bin[b]));
          }
        }
      }
      if (kind == FeatureKind::discrete_numeric) {
        fd.values = uniq;
        fd.representatives = uniq;
      }
      fd.kind = kind;
      fd.ordered = true;
    } else if (kind == FeatureKind::ordered_categorical) {
      std::set<std::string> allowed(spec.order.begin(), spec.order.end());
      for (const auto& cell : raw) {
        require(is_missing_token(cell) || allowed.count(cell),
                "discretizer: value '" + cell + "' of ordered feature '" + spec.name +
                    "' is not covered by the declared order");
      }
      fd.kind = kind;
      fd.vocab = spec.order;
      fd.ordered = true;
    } else {
      std::set<std::string> cats;
      for (const auto& cell : raw)
        if (!is_missing_token(cell)) cats.insert(cell);
      require(!cats.empty(), "discretizer: feature '" + spec.name + "' has no usable training values");
      fd.kind = FeatureKind::unordered_categorical;
      fd.vocab.assign(cats.begin(), cats.end());
      fd.vocab.push_back(kNaToken);
      fd.na_code = static_cast<int>(fd.vocab.size()) - 1;
      fd.ordered = false;
    }

    d.feats_.push_back(std::move(fd));
  }

  std::vector<int> cards;
  for (const auto& fd : d.feats_) cards.push_back(fd.cardinality());
  d.domain_ = Domain::from_cards(std::move(cards));
  return d;
}

int Discretizer::encode_cell(int feature, const std::string& raw, bool* in_domain) const {
  const FeatureDomain& fd = feats_[feature];
  *in_domain = true;
  switch (fd.kind) {
    case FeatureKind::unordered_categorical: {
      if (!is_missing_token(raw)) {
        for (size_t c = 0; c + 1 < fd.vocab.size(); ++c)
          if (fd.vocab[c] == raw) return static_cast<int>(c);
      }
      *in_domain = false;
      return fd.na_code;
    }
    case FeatureKind::ordered_categorical: {
      if (!is_missing_token(raw)) {
        for (size_t c = 0; c < fd.vocab.size(); ++c)
          if (fd.vocab[c] == raw) return static_cast<int>(c);
      }
      *in_domain = false;
      return 0;
    }
    case FeatureKind::discrete_numeric: {
      auto v = parse_double(raw);
      if (!v.has_value() || !std::isfinite(*v)) {
        *in_domain = false;
        return 0;
      }
      auto it = std::lower_bound(fd.values.begin(), fd.values.end(), *v);
      if (it != fd.values.end() && *it == *v) return static_cast<int>(it - fd.values.begin());
      *in_domain = false;
      // Snap to the nearest training value, ties toward the lower one.
      if (it == fd.values.end()) return static_cast<int>(fd.values.size()) - 1;
      if (it == fd.values.begin()) return 0;
      int hi = static_cast<int>(it - fd.values.begin());
      int lo = hi - 1;
      return (*v - fd.values[lo] <= fd.values[hi] - *v) ? lo : hi;
    }
    case FeatureKind::binned_numeric: {
      auto v = parse_double(raw);
      if (!v.has_value() || std::isnan(*v)) {
        *in_domain = false;
        return 0;
      }
      if (std::isinf(*v)) {
        *in_domain = false;
        return *v > 0 ? static_cast<int>(fd.edges.size()) : 0;
      }
      return bin_index(fd.edges, *v);
    }
    case FeatureKind::auto_numeric:
      break;
  }
  fail("discretizer: unresolved feature kind");
}

std::vector<DiscreteInstance> Discretizer::transform(const Table& t, TransformStats* stats) const {
  std::vector<int> cols;
  for (const auto& fd : feats_) {
    int c = t.col_index(fd.name);
    require(c >= 0, "discretizer: column '" + fd.name + "' missing from table");
    cols.push_back(c);
  }
  if (stats) {
    stats->total_cells = 0;
    stats->out_of_domain_cells = 0;
    stats->per_feature_out_of_domain.assign(feats_.size(), 0);
    stats->row_has_fallback.assign(t.nrows(), 0);
  }
  std::vector<DiscreteInstance> out;
  out.reserve(t.nrows());
  for (size_t i = 0; i < t.nrows(); ++i) {
    DiscreteInstance x(feats_.size());
    for (size_t j = 0; j < feats_.size(); ++j) {
      bool ok = true;
      x[j] = encode_cell(static_cast<int>(j), t.rows[i][cols[j]], &ok);
      if (stats) {
        ++stats->total_cells;
        if (!ok) {
          ++stats->out_of_domain_cells;
          ++stats->per_feature_out_of_domain[j];
          stats->row_has_fallback[i] = 1;
        }
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<int> Discretizer::labels(const Table& t) const {
  int col = t.col_index(schema_.label_column);
  require(col >= 0, "discretizer: label column '" + schema_.label_column + "' missing");
  auto pos_num = parse_double(schema_.positive_label);
  std::vector<int> y;
  y.reserve(t.nrows());
  for (const auto& row : t.rows) {
    const std::string& cell = row[col];
    bool pos = (cell == schema_.positive_label);
    if (!pos && pos_num.has_value()) {
      auto v = parse_double(cell);
      pos = v.has_value() && *v == *pos_num;
    }
    y.push_back(pos ? 1 : 0);
  }
  return y;
}

BinDiagnostics Discretizer::diagnostics(const Table& test) const {
  require(test.nrows() > 0, "discretizer: diagnostics on empty table");
  TransformStats stats;
  transform(test, &stats);
  BinDiagnostics d;
  d.rows = static_cast<long>(test.nrows());
  d.per_feature_out_of_domain = stats.per_feature_out_of_domain;
  d.coverage = 1.0 - static_cast<double>(stats.out_of_domain_cells) /
                         static_cast<double>(stats.total_cells);
  long clean_rows = 0;
  for (uint8_t flag : stats.row_has_fallback) clean_rows += flag ? 0 : 1;
  d.fidelity = static_cast<double>(clean_rows) / static_cast<double>(test.nrows());
  return d;
}

double Discretizer::representative(int feature, int code) const {
  const FeatureDomain& fd = feats_.at(feature);
  require(code >= 0 && code < fd.cardinality(), "discretizer: code out of range");
  if (fd.representatives.empty()) return std::numeric_limits<double>::quiet_NaN();
  return fd.representatives[code];
}

std::string Discretizer::display_value(int feature, int code) const {
  const FeatureDomain& fd = feats_.at(feature);
  require(code >= 0 && code < fd.cardinality(), "discretizer: code out of range");
  switch (fd.kind) {
    case FeatureKind::unordered_categorical:
    case FeatureKind::ordered_categorical:
      return fd.vocab[code];
    case FeatureKind::discrete_numeric:
      return format_number(fd.values[code]);
    case FeatureKind::binned_numeric: {
      std::ostringstream ss;
      double lo = (code == 0) ? -std::numeric_limits<double>::infinity() : fd.edges[code - 1];
      double hi = (code == static_cast<int>(fd.edges.size()))
                      ? std::numeric_limits<double>::infinity()
                      : fd.edges[code];
      ss << "(" << lo << ", " << hi << "]~" << fd.representatives[code];
      return ss.str();
    }
    case FeatureKind::auto_numeric:
      break;
  }
  fail("discretizer: unresolved feature kind");
}

std::string Discretizer::to_json_text() const {
  json doc;
  doc["format"] = "par-discretizer";
  doc["version"] = 1;
  doc["schema"] = json::parse(schema_.to_json_text());
  doc["options"] = {{"bins_per_numeric", opt_.bins_per_numeric},
                    {"discrete_cardinality_threshold", opt_.discrete_cardinality_threshold}};
  doc["features"] = json::array();
  for (const auto& fd : feats_) {
    json jf;
    jf["name"] = fd.name;
    jf["kind"] = feature_kind_name(fd.kind);
    jf["ordered"] = fd.ordered;
    if (!fd.vocab.empty()) jf["vocab"] = fd.vocab;
    if (fd.na_code >= 0) jf["na_code"] = fd.na_code;
    if (!fd.values.empty()) jf["values"] = fd.values;
    if (!fd.edges.empty()) jf["edges"] = fd.edges;
    if (!fd.representatives.empty()) jf["representatives"] = fd.representatives;
    doc["features"].push_back(jf);
  }
  return doc.dump(2);
}

Discretizer Discretizer::from_json_text(const std::string& text) {
  json doc = json::parse(text);
  require(doc.value("format", "") == "par-discretizer", "discretizer: bad artifact format");
  require(doc.value("version", 0) == 1, "discretizer: unsupported artifact version");
  Discretizer d;
  d.schema_ = Schema::from_json_text(doc.at("schema").dump());
  d.opt_.bins_per_numeric = doc.at("options").at("bins_per_numeric").get<int>();
  d.opt_.discrete_cardinality_threshold =
      doc.at("options").at("discrete_cardinality_threshold").get<int>();
  for (const auto& jf : doc.at("features")) {
    FeatureDomain fd;
    fd.name = jf.at("name").get<std::string>();
    fd.kind = feature_kind_from_name(jf.at("kind").get<std::string>());
    fd.ordered = jf.at("ordered").get<bool>();
    if (jf.contains("vocab")) fd.vocab = jf.at("vocab").get<std::vector<std::string>>();
    fd.na_code = jf.value("na_code", -1);
    if (jf.contains("values")) fd.values = jf.at("values").get<std::vector<double>>();
    if (jf.contains("edges")) fd.edges = jf.at("edges").get<std::vector<double>>();
    if (jf.contains("representatives"))
      fd.representatives = jf.at("representatives").get<std::vector<double>>();
    d.feats_.push_back(std::move(fd));
  }
  std::vector<int> cards;
  for (const auto& fd : d.feats_) cards.push_back(fd.cardinality());
  d.domain_ = Domain::from_cards(std::move(cards));
  return d;
}

void Discretizer::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "discretizer: cannot write " + path);
  out << to_json_text() << "\n";
}

Discretizer Discretizer::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "discretizer: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace par
