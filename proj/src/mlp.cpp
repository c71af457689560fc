#include "par/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace par {

namespace {

double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  fail("mlp: bad activation");
}

double act_derivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
  }
  fail("mlp: bad activation");
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  fail("mlp: bad activation");
}

Activation activation_from_name(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  fail("mlp: unknown activation '" + s + "'");
}

MlpModel MlpModel::make(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
  require(dims.size() >= 2, "mlp: need at least input and output dims");
  require(acts.size() == dims.size() - 1, "mlp: one activation per layer required");
  MlpModel m;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    require(dims[i] > 0 && dims[i + 1] > 0, "mlp: dims must be positive");
    Layer layer;
    double s = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> unif(-s, s);
    layer.w.resize(dims[i + 1], dims[i]);
    for (int r = 0; r < layer.w.rows(); ++r)
      for (int c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = unif(rng);
    layer.b = Eigen::VectorXd::Zero(dims[i + 1]);
    layer.act = acts[i];
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& x, Tape* tape) const {
  require(x.size() == input_dim(), "mlp: input dim mismatch");
  if (tape) {
    tape->inputs.clear();
    tape->preacts.clear();
    tape->postacts.clear();
  }
  Eigen::VectorXd h = x;
  for (const Layer& layer : layers) {
    if (tape) tape->inputs.push_back(h);
    Eigen::VectorXd z = layer.w * h + layer.b;
    Eigen::VectorXd a(z.size());
    for (int i = 0; i < z.size(); ++i) a(i) = apply_act(layer.act, z(i));
    if (tape) {
      tape->preacts.push_back(z);
      tape->postacts.push_back(a);
    }
    h = std::move(a);
  }
  return h;
}

std::vector<double> MlpModel::value(std::span<const double> x) const {
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd out = forward(xv);
  return std::vector<double>(out.data(), out.data() + out.size());
}

MlpGradients MlpGradients::zeros_like(const MlpModel& m) {
  MlpGradients g;
  for (const Layer& layer : m.layers) {
    g.dw.emplace_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    g.db.emplace_back(Eigen::VectorXd::Zero(layer.b.size()));
  }
  return g;
}

void MlpGradients::zero() {
  for (auto& m : dw) m.setZero();
  for (auto& v : db) v.setZero();
}

void MlpGradients::add(const MlpGradients& other) {
  for (size_t i = 0; i < dw.size(); ++i) {
    dw[i] += other.dw[i];
    db[i] += other.db[i];
  }
}

void MlpGradients::scale(double s) {
  for (auto& m : dw) m *= s;
  for (auto& v : db) v *= s;
}

namespace {

Eigen::VectorXd backward_impl(const MlpModel& m, const Tape& tape, Eigen::VectorXd delta,
                              bool delta_is_preact, MlpGradients* accum) {
  require(tape.inputs.size() == m.layers.size(), "mlp: tape does not match model");
  for (int i = static_cast<int>(m.layers.size()) - 1; i >= 0; --i) {
    const Layer& layer = m.layers[i];
    bool last = (i == static_cast<int>(m.layers.size()) - 1);
    if (!(last && delta_is_preact)) {
      for (int k = 0; k < delta.size(); ++k)
        delta(k) *= act_derivative(layer.act, tape.preacts[i](k), tape.postacts[i](k));
    }
    if (accum) {
      accum->dw[i].noalias() += delta * tape.inputs[i].transpose();
      accum->db[i] += delta;
    }
    delta = layer.w.transpose() * delta;
  }
  return delta;
}

}  // namespace

Eigen::VectorXd mlp_backward(const MlpModel& m, const Tape& tape, const Eigen::VectorXd& dout,
                             MlpGradients* accum) {
  return backward_impl(m, tape, dout, false, accum);
}

Eigen::VectorXd mlp_backward_from_last_preact(const MlpModel& m, const Tape& tape,
                                              const Eigen::VectorXd& delta, MlpGradients* accum) {
  return backward_impl(m, tape, delta, true, accum);
}

AdamState AdamState::make(const MlpModel& m, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Layer& layer : m.layers) {
    s.mw.emplace_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    s.vw.emplace_back(Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    s.mb.emplace_back(Eigen::VectorXd::Zero(layer.b.size()));
    s.vb.emplace_back(Eigen::VectorXd::Zero(layer.b.size()));
  }
  return s;
}

void AdamState::update(MlpModel& m, const MlpGradients& g) {
  ++step;
  double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < m.layers.size(); ++i) {
    mw[i] = beta1 * mw[i] + (1.0 - beta1) * g.dw[i];
    vw[i] = beta2 * vw[i] + (1.0 - beta2) * g.dw[i].cwiseProduct(g.dw[i]);
    mb[i] = beta1 * mb[i] + (1.0 - beta1) * g.db[i];
    vb[i] = beta2 * vb[i] + (1.0 - beta2) * g.db[i].cwiseProduct(g.db[i]);
    m.layers[i].w -= lr * (mw[i] / c1).cwiseQuotient(((vw[i] / c2).cwiseSqrt().array() + eps).matrix());
    m.layers[i].b -= lr * (mb[i] / c1).cwiseQuotient(((vb[i] / c2).cwiseSqrt().array() + eps).matrix());
  }
}

double bce_loss(double yhat, int y) {
  double p = std::clamp(yhat, 1e-12, 1.0 - 1e-12);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

void mlp_write(std::ostream& out, const MlpModel& m) {
  out << mlp_to_text(m);
}

MlpModel mlp_read(std::istream& in) {
  std::string tok;
  int version = 0;
  in >> tok >> version;
  require(tok == "parmlp" && version == 1, "mlp: unsupported serialization header");
  size_t nlayers = 0;
  in >> tok >> nlayers;
  require(tok == "layers" && nlayers > 0, "mlp: bad layer count");
  MlpModel m;
  for (size_t i = 0; i < nlayers; ++i) {
    int in_dim = 0, out_dim = 0;
    std::string act;
    in >> tok >> in_dim >> out_dim >> act;
    require(tok == "layer" && in_dim > 0 && out_dim > 0, "mlp: bad layer record");
    Layer layer;
    layer.act = activation_from_name(act);
    layer.w.resize(out_dim, in_dim);
    for (int r = 0; r < out_dim; ++r)
      for (int c = 0; c < in_dim; ++c) in >> layer.w(r, c);
    layer.b.resize(out_dim);
    for (int r = 0; r < out_dim; ++r) in >> layer.b(r);
    require(!in.fail(), "mlp: truncated layer record");
    m.layers.push_back(std::move(layer));
  }
  return m;
}

std::string mlp_to_text(const MlpModel& m) {
  std::ostringstream out;
  out << "parmlp 1\n";
  out << "layers " << m.layers.size() << "\n";
  for (const Layer& layer : m.layers) {
    out << "layer " << layer.w.cols() << ' ' << layer.w.rows() << ' ' << activation_name(layer.act)
        << "\n";
    for (int r = 0; r < layer.w.rows(); ++r) {
      for (int c = 0; c < layer.w.cols(); ++c) {
        if (c) out << ' ';
        out << fmt_g17(layer.w(r, c));
      }
      out << "\n";
    }
    for (int r = 0; r < layer.b.size(); ++r) {
      if (r) out << ' ';
      out << fmt_g17(layer.b(r));
    }
    out << "\n";
  }
  return out.str();
}

MlpModel mlp_from_text(const std::string& text) {
  std::istringstream in(text);
  return mlp_read(in);
}

void save_mlp(const MlpModel& m, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "mlp: cannot write " + path);
  out << mlp_to_text(m);
}

MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "mlp: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return mlp_from_text(ss.str());
}

}  // namespace par
