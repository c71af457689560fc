#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "par/numeric.hpp"

namespace par {

enum class Activation { identity, relu, sigmoid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

struct Layer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
  Activation act = Activation::identity;
};

struct Tape {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<Eigen::VectorXd> preacts;
  std::vector<Eigen::VectorXd> postacts;
};

struct MlpModel {
  std::vector<Layer> layers;

  // dims = {in, h1, ..., out}; acts has one entry per layer. Weights are
  // fan-in scaled uniform, biases zero.
  static MlpModel make(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);

  int input_dim() const { return static_cast<int>(layers.front().w.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().w.rows()); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Tape* tape = nullptr) const;
  std::vector<double> value(std::span<const double> x) const;
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;

  static MlpGradients zeros_like(const MlpModel& m);
  void zero();
  void add(const MlpGradients& other);
  void scale(double s);
};

// Reverse pass from d(loss)/d(output); accumulates parameter gradients into
// `accum` when given and returns d(loss)/d(input).
Eigen::VectorXd mlp_backward(const MlpModel& m, const Tape& tape, const Eigen::VectorXd& dout,
                             MlpGradients* accum);
// Same, but `delta` is taken w.r.t. the last layer's pre-activation. Used for
// numerically exact cross-entropy-through-sigmoid updates.
Eigen::VectorXd mlp_backward_from_last_preact(const MlpModel& m, const Tape& tape,
                                              const Eigen::VectorXd& delta, MlpGradients* accum);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;

  static AdamState make(const MlpModel& m, double lr);
  void update(MlpModel& m, const MlpGradients& g);
};

// Binary cross-entropy with probability clamped to [1e-12, 1 - 1e-12].
double bce_loss(double yhat, int y);

std::string mlp_to_text(const MlpModel& m);
MlpModel mlp_from_text(const std::string& text);
void mlp_write(std::ostream& out, const MlpModel& m);
MlpModel mlp_read(std::istream& in);
void save_mlp(const MlpModel& m, const std::string& path);
MlpModel load_mlp(const std::string& path);

}  // namespace par
