#include "par/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace par {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSimplexTol = 1e-9;

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string scope_string(const std::vector<int>& scope) {
  std::string s;
  for (size_t i = 0; i < scope.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(scope[i]);
  }
  return s;
}

std::vector<int> parse_scope(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::stoi(cur));
  return out;
}

}  // namespace

SoftInstance SoftInstance::from_one_hot(const DiscreteInstance& x, const std::vector<int>& cards) {
  require(x.size() == cards.size(), "SoftInstance: arity mismatch");
  SoftInstance s;
  s.q.resize(x.size());
  for (size_t j = 0; j < x.size(); ++j) {
    require(x[j] >= 0 && x[j] < cards[j], "SoftInstance: code out of range");
    s.q[j].assign(cards[j], 0.0);
    s.q[j][x[j]] = 1.0;
  }
  return s;
}

void SoftInstance::check(const std::vector<int>& cards) const {
  require(q.size() == cards.size(), "SoftInstance: arity mismatch");
  for (size_t j = 0; j < q.size(); ++j) {
    require(static_cast<int>(q[j].size()) == cards[j], "SoftInstance: block size mismatch");
    double sum = 0.0;
    for (double v : q[j]) {
      require(v >= -kSimplexTol, "SoftInstance: negative probability in block " + std::to_string(j));
      sum += v;
    }
    require(std::abs(sum - 1.0) <= kSimplexTol,
            "SoftInstance: block " + std::to_string(j) + " sums to " + std::to_string(sum));
  }
}

Circuit::Circuit(std::vector<CircuitNode> nodes, int root, std::vector<int> cards)
    : nodes_(std::move(nodes)), root_(root), cards_(std::move(cards)) {}

std::vector<std::vector<int>> Circuit::scopes() const {
  std::vector<std::vector<int>> sc(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const CircuitNode& n = nodes_[i];
    if (n.kind == CircuitNode::Kind::leaf) {
      if (n.feature >= 0 && n.feature < num_features()) sc[i] = {n.feature};
      continue;
    }
    std::vector<int> u;
    for (int c : n.children) {
      if (c < 0 || c >= static_cast<int>(i)) continue;  // reported by validate
      u.insert(u.end(), sc[c].begin(), sc[c].end());
    }
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    sc[i] = std::move(u);
  }
  return sc;
}

ValidationReport Circuit::validate() const {
  ValidationReport rep;
  auto bad = [&rep](int node, std::string what) { rep.issues.push_back({node, std::move(what)}); };

  if (nodes_.empty()) {
    bad(-1, "circuit has no nodes");
    valid_state_ = -1;
    return rep;
  }
  if (root_ < 0 || root_ >= static_cast<int>(nodes_.size())) bad(-1, "root index out of range");
  if (cards_.empty()) bad(-1, "circuit has no features");

  auto sc = scopes();
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const CircuitNode& n = nodes_[i];
    switch (n.kind) {
      case CircuitNode::Kind::leaf: {
        if (n.feature < 0 || n.feature >= num_features()) {
          bad(static_cast<int>(i), "leaf feature out of range");
          break;
        }
        if (static_cast<int>(n.theta.size()) != cards_[n.feature]) {
          bad(static_cast<int>(i), "leaf parameter arity mismatch");
          break;
        }
        double sum = 0.0;
        bool neg = false;
        for (double t : n.theta) {
          if (t < 0.0 || t > 1.0) neg = true;
          sum += t;
        }
        if (neg) bad(static_cast<int>(i), "leaf parameter outside [0,1]");
        if (std::abs(sum - 1.0) > kSimplexTol) bad(static_cast<int>(i), "leaf parameters do not sum to 1");
        break;
      }
      case CircuitNode::Kind::sum: {
        if (n.children.empty()) {
          bad(static_cast<int>(i), "sum node without children");
          break;
        }
        if (n.weights.size() != n.children.size()) {
          bad(static_cast<int>(i), "sum weight arity mismatch");
          break;
        }
        bool edge_ok = true;
        for (int c : n.children) {
          if (c < 0 || c >= static_cast<int>(i)) {
            bad(static_cast<int>(i), "child index must precede node (topological order)");
            edge_ok = false;
          }
        }
        double sum = 0.0;
        for (double w : n.weights) {
          if (!(w > 0.0) || w > 1.0) bad(static_cast<int>(i), "sum weight outside (0,1]");
          sum += w;
        }
        if (std::abs(sum - 1.0) > kSimplexTol) bad(static_cast<int>(i), "sum weights do not sum to 1");
        if (edge_ok) {
          for (int c : n.children) {
            if (sc[c] != sc[i] || sc[n.children[0]] != sc[c])
              bad(static_cast<int>(i), "sum children scopes differ (smoothness violated)");
          }
        }
        break;
      }
      case CircuitNode::Kind::product: {
        if (n.children.empty()) {
          bad(static_cast<int>(i), "product node without children");
          break;
        }
        bool edge_ok = true;
        for (int c : n.children) {
          if (c < 0 || c >= static_cast<int>(i)) {
            bad(static_cast<int>(i), "child index must precede node (topological order)");
            edge_ok = false;
          }
        }
        if (edge_ok) {
          size_t total = 0;
          std::vector<int> u;
          for (int c : n.children) {
            total += sc[c].size();
            u.insert(u.end(), sc[c].begin(), sc[c].end());
          }
          std::sort(u.begin(), u.end());
          u.erase(std::unique(u.begin(), u.end()), u.end());
          if (u.size() != total)
            bad(static_cast<int>(i), "product children scopes overlap (decomposability violated)");
        }
        break;
      }
    }
  }
  valid_state_ = rep.ok() ? 1 : -1;
  return rep;
}

void Circuit::ensure_valid() const {
  if (valid_state_ == 0) validate();
  if (valid_state_ == 1) return;
  auto rep = validate();
  fail("circuit: validation failed: " + rep.to_string());
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::string s;
  for (const auto& issue : issues) {
    if (!s.empty()) s += "; ";
    s += "node " + std::to_string(issue.node) + ": " + issue.what;
  }
  return s;
}

template <typename LeafLog>
void Circuit::upward(LeafLog&& leaf_log, std::vector<double>& out) const {
  out.assign(nodes_.size(), -kInf);
  std::vector<double> terms;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const CircuitNode& n = nodes_[i];
    switch (n.kind) {
      case CircuitNode::Kind::leaf:
        out[i] = leaf_log(n);
        break;
      case CircuitNode::Kind::product: {
        double acc = 0.0;
        for (int c : n.children) acc += out[c];
        out[i] = acc;
        break;
      }
      case CircuitNode::Kind::sum: {
        terms.clear();
        for (size_t k = 0; k < n.children.size(); ++k)
          terms.push_back(std::log(n.weights[k]) + out[n.children[k]]);
        out[i] = log_sum_exp(terms);
        break;
      }
    }
  }
}

double Circuit::log_likelihood(const DiscreteInstance& x) const {
  ensure_valid();
  require(x.size() == cards_.size(), "circuit: instance arity mismatch");
  for (size_t j = 0; j < x.size(); ++j)
    require(x[j] >= 0 && x[j] < cards_[j], "circuit: code out of range at feature " + std::to_string(j));
  std::vector<double> logv;
  upward([&x](const CircuitNode& n) { return std::log(n.theta[x[n.feature]]); }, logv);
  return logv[root_];
}

double Circuit::soft_value(const SoftInstance& s) const {
  ensure_valid();
  s.check(cards_);
  std::vector<double> logv;
  upward(
      [&s](const CircuitNode& n) {
        const auto& q = s.q[n.feature];
        double acc = 0.0;
        for (size_t c = 0; c < q.size(); ++c) acc += q[c] * n.theta[c];
        return std::log(acc);
      },
      logv);
  return logv[root_];
}

// Log-space derivatives d v / d v_node accumulated root-to-leaves.
std::vector<double> Circuit::downward_log_derivatives(const std::vector<double>& logv) const {
  std::vector<double> logd(nodes_.size(), -kInf);
  logd[root_] = 0.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (logd[i] == -kInf) continue;
    const CircuitNode& n = nodes_[static_cast<size_t>(i)];
    if (n.kind == CircuitNode::Kind::sum) {
      for (size_t k = 0; k < n.children.size(); ++k) {
        int c = n.children[k];
        double add = logd[i] + std::log(n.weights[k]);
        double terms[2] = {logd[c], add};
        logd[c] = log_sum_exp(terms);
      }
    } else if (n.kind == CircuitNode::Kind::product) {
      // Sibling products via exclusion; track zeros explicitly.
      int num_zero = 0;
      double finite_sum = 0.0;
      for (int c : n.children) {
        if (logv[c] == -kInf) ++num_zero;
        else finite_sum += logv[c];
      }
      for (int c : n.children) {
        double excl;
        if (num_zero == 0) excl = finite_sum - logv[c];
        else if (num_zero == 1 && logv[c] == -kInf) excl = finite_sum;
        else excl = -kInf;
        if (excl == -kInf) continue;
        double add = logd[i] + excl;
        double terms[2] = {logd[c], add};
        logd[c] = log_sum_exp(terms);
      }
    }
  }
  return logd;
}

std::vector<std::vector<double>> Circuit::soft_gradient(const SoftInstance& s) const {
  ensure_valid();
  s.check(cards_);
  std::vector<double> logv;
  upward(
      [&s](const CircuitNode& n) {
        const auto& q = s.q[n.feature];
        double acc = 0.0;
        for (size_t c = 0; c < q.size(); ++c) acc += q[c] * n.theta[c];
        return std::log(acc);
      },
      logv);
  require(logv[root_] != -kInf, "circuit: soft value is zero, gradient undefined");
  std::vector<double> logd = downward_log_derivatives(logv);

  std::vector<std::vector<double>> grad(cards_.size());
  std::vector<std::vector<double>> acc(cards_.size());
  for (size_t j = 0; j < cards_.size(); ++j) acc[j].assign(cards_[j], -kInf);
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const CircuitNode& n = nodes_[i];
    if (n.kind != CircuitNode::Kind::leaf || logd[i] == -kInf) continue;
    auto& a = acc[n.feature];
    for (size_t c = 0; c < n.theta.size(); ++c) {
      if (n.theta[c] <= 0.0) continue;
      double add = logd[i] + std::log(n.theta[c]);
      double terms[2] = {a[c], add};
      a[c] = log_sum_exp(terms);
    }
  }
  for (size_t j = 0; j < cards_.size(); ++j) {
    grad[j].assign(cards_[j], 0.0);
    for (int c = 0; c < cards_[j]; ++c)
      grad[j][c] = std::exp(acc[j][c] - logv[root_]);
  }
  return grad;
}

std::vector<std::vector<double>> Circuit::soft_gradient_by_replacement(const SoftInstance& s) const {
  ensure_valid();
  s.check(cards_);
  double base = soft_value(s);
  require(base != -kInf, "circuit: soft value is zero, gradient undefined");
  std::vector<std::vector<double>> grad(cards_.size());
  SoftInstance t = s;
  for (size_t j = 0; j < cards_.size(); ++j) {
    grad[j].assign(cards_[j], 0.0);
    std::vector<double> saved = t.q[j];
    for (int c = 0; c < cards_[j]; ++c) {
      std::fill(t.q[j].begin(), t.q[j].end(), 0.0);
      t.q[j][c] = 1.0;
      grad[j][c] = std::exp(soft_value(t) - base);
    }
    t.q[j] = saved;
  }
  return grad;
}

DiscreteInstance Circuit::sample(Rng& rng) const {
  ensure_valid();
  DiscreteInstance x(cards_.size(), -1);
  std::vector<int> stack = {root_};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const CircuitNode& n = nodes_[id];
    switch (n.kind) {
      case CircuitNode::Kind::leaf: {
        double u = unif(rng);
        double acc = 0.0;
        int pick = static_cast<int>(n.theta.size()) - 1;
        for (size_t c = 0; c < n.theta.size(); ++c) {
          acc += n.theta[c];
          if (u <= acc) {
            pick = static_cast<int>(c);
            break;
          }
        }
        x[n.feature] = pick;
        break;
      }
      case CircuitNode::Kind::product:
        for (int c : n.children) stack.push_back(c);
        break;
      case CircuitNode::Kind::sum: {
        double u = unif(rng);
        double acc = 0.0;
        int pick = n.children.back();
        for (size_t k = 0; k < n.children.size(); ++k) {
          acc += n.weights[k];
          if (u <= acc) {
            pick = n.children[k];
            break;
          }
        }
        stack.push_back(pick);
        break;
      }
    }
  }
  for (size_t j = 0; j < x.size(); ++j)
    require(x[j] >= 0, "circuit: sample left feature " + std::to_string(j) + " unset");
  return x;
}

std::string Circuit::to_text() const {
  ensure_valid();
  auto sc = scopes();
  std::ostringstream out;
  out << "parpc 1\n";
  out << "features " << num_features() << "\n";
  out << "cards";
  for (int c : cards_) out << ' ' << c;
  out << "\n";
  out << "nodes " << nodes_.size() << "\n";
  out << "root " << root_ << "\n";
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const CircuitNode& n = nodes_[i];
    out << i << ' ';
    switch (n.kind) {
      case CircuitNode::Kind::leaf:
        out << "leaf " << scope_string(sc[i]) << ' ' << n.feature;
        for (double t : n.theta) out << ' ' << fmt_g17(t);
        break;
      case CircuitNode::Kind::sum:
        out << "sum " << scope_string(sc[i]) << ' ' << n.children.size();
        for (size_t k = 0; k < n.children.size(); ++k)
          out << ' ' << n.children[k] << ':' << fmt_g17(n.weights[k]);
        break;
      case CircuitNode::Kind::product:
        out << "prod " << scope_string(sc[i]) << ' ' << n.children.size();
        for (int c : n.children) out << ' ' << c;
        break;
    }
    out << "\n";
  }
  return out.str();
}

Circuit Circuit::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  int version = 0;
  in >> tok >> version;
  require(tok == "parpc" && version == 1, "circuit: unsupported serialization header");
  int nfeat = 0;
  in >> tok >> nfeat;
  require(tok == "features" && nfeat > 0, "circuit: bad feature count");
  in >> tok;
  require(tok == "cards", "circuit: missing cards");
  std::vector<int> cards(nfeat);
  for (int& c : cards) in >> c;
  size_t nnodes = 0;
  in >> tok >> nnodes;
  require(tok == "nodes" && nnodes > 0, "circuit: bad node count");
  int root = -1;
  in >> tok >> root;
  require(tok == "root", "circuit: missing root");

  std::vector<CircuitNode> nodes(nnodes);
  std::vector<std::vector<int>> declared(nnodes);
  for (size_t i = 0; i < nnodes; ++i) {
    size_t id;
    std::string kind, scope;
    in >> id >> kind >> scope;
    require(in.good() && id == i, "circuit: nodes must be listed in index order");
    declared[i] = parse_scope(scope);
    CircuitNode n;
    if (kind == "leaf") {
      n.kind = CircuitNode::Kind::leaf;
      in >> n.feature;
      require(n.feature >= 0 && n.feature < nfeat, "circuit: leaf feature out of range");
      n.theta.resize(cards[n.feature]);
      for (double& t : n.theta) in >> t;
    } else if (kind == "sum") {
      n.kind = CircuitNode::Kind::sum;
      size_t k;
      in >> k;
      n.children.resize(k);
      n.weights.resize(k);
      for (size_t a = 0; a < k; ++a) {
        std::string pair;
        in >> pair;
        size_t colon = pair.find(':');
        require(colon != std::string::npos, "circuit: malformed sum edge");
        n.children[a] = std::stoi(pair.substr(0, colon));
        n.weights[a] = std::stod(pair.substr(colon + 1));
      }
    } else if (kind == "prod") {
      n.kind = CircuitNode::Kind::product;
      size_t k;
      in >> k;
      n.children.resize(k);
      for (int& c : n.children) in >> c;
    } else {
      fail("circuit: unknown node kind '" + kind + "'");
    }
    require(!in.fail(), "circuit: truncated node record");
    nodes[i] = std::move(n);
  }
  Circuit circ(std::move(nodes), root, std::move(cards));
  circ.ensure_valid();
  auto sc = circ.scopes();
  for (size_t i = 0; i < nnodes; ++i)
    require(sc[i] == declared[i], "circuit: stored scope disagrees with structure at node " +
                                      std::to_string(i));
  return circ;
}

void Circuit::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "circuit: cannot write " + path);
  out << to_text();
}

Circuit Circuit::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "circuit: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace par
