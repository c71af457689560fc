#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "par/classifier.hpp"
#include "par/mlp.hpp"

using namespace par;

namespace {

MlpModel tiny_hand_model() {
  MlpModel m;
  Layer l1;
  l1.w.resize(2, 2);
  l1.w << 1.0, -1.0, 0.5, 2.0;
  l1.b.resize(2);
  l1.b << 0.1, -0.2;
  l1.act = Activation::relu;
  Layer l2;
  l2.w.resize(1, 2);
  l2.w << 1.0, 1.0;
  l2.b.resize(1);
  l2.b << 0.3;
  l2.act = Activation::sigmoid;
  m.layers = {l1, l2};
  return m;
}

double fd_loss_over_params(MlpModel& m, int layer, int row, int col, bool bias,
                           const Eigen::VectorXd& x, const std::function<double(double)>& loss_of_out,
                           double h) {
  auto bump = [&](double d) {
    if (bias)
      m.layers[layer].b(row) += d;
    else
      m.layers[layer].w(row, col) += d;
  };
  bump(h);
  double up = loss_of_out(m.forward(x)(0));
  bump(-2.0 * h);
  double down = loss_of_out(m.forward(x)(0));
  bump(h);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("forward pass matches hand arithmetic") {
  MlpModel m = tiny_hand_model();
  Eigen::VectorXd x(2);
  x << 0.4, 0.3;
  // h1 = relu(0.4 - 0.3 + 0.1) = 0.2; h2 = relu(0.2 + 0.6 - 0.2) = 0.6
  // out = sigmoid(0.2 + 0.6 + 0.3) = sigmoid(1.1)
  double expect = 1.0 / (1.0 + std::exp(-1.1));
  Eigen::VectorXd out = m.forward(x);
  CHECK(out(0) == doctest::Approx(expect).epsilon(1e-12));

  // Negative pre-activation clips through the relu.
  Eigen::VectorXd x2(2);
  x2 << -0.5, 0.1;
  // h1 = relu(-0.5 - 0.1 + 0.1) = 0; h2 = relu(-0.25 + 0.2 - 0.2) = 0
  double expect2 = 1.0 / (1.0 + std::exp(-0.3));
  CHECK(m.forward(x2)(0) == doctest::Approx(expect2).epsilon(1e-12));

  std::vector<double> xv = {0.4, 0.3};
  CHECK(m.value(xv)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("backward gradients match central differences") {
  Rng rng(11);
  MlpModel m = MlpModel::make({3, 4, 2}, {Activation::relu, Activation::identity}, rng);
  Eigen::VectorXd x(3);
  x << 0.37, -0.82, 0.55;

  // loss = 0.5 * ||out||^2, so dloss/dout = out.
  auto loss = [&](const MlpModel& model) {
    Eigen::VectorXd out = model.forward(x);
    return 0.5 * out.squaredNorm();
  };

  Tape tape;
  Eigen::VectorXd out = m.forward(x, &tape);
  MlpGradients grads = MlpGradients::zeros_like(m);
  Eigen::VectorXd dx = mlp_backward(m, tape, out, &grads);

  double h = 1e-5;
  for (size_t l = 0; l < m.layers.size(); ++l) {
    for (int r = 0; r < m.layers[l].w.rows(); ++r) {
      for (int c = 0; c < m.layers[l].w.cols(); ++c) {
        double& ref = m.layers[l].w(r, c);
        double keep = ref;
        ref = keep + h;
        double up = loss(m);
        ref = keep - h;
        double down = loss(m);
        ref = keep;
        double fd = (up - down) / (2.0 * h);
        CHECK(testutil::rel_err(grads.dw[l](r, c), fd) < 1e-6);
      }
      double& ref = m.layers[l].b(r);
      double keep = ref;
      ref = keep + h;
      double up = loss(m);
      ref = keep - h;
      double down = loss(m);
      ref = keep;
      double fd = (up - down) / (2.0 * h);
      CHECK(testutil::rel_err(grads.db[l](r), fd) < 1e-6);
    }
  }
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    double fd = (0.5 * m.forward(xp).squaredNorm() - 0.5 * m.forward(xm).squaredNorm()) / (2.0 * h);
    CHECK(testutil::rel_err(dx(i), fd) < 1e-6);
  }
}

TEST_CASE("cross-entropy delta through the sigmoid matches differences") {
  Rng rng(12);
  MlpModel m = MlpModel::make({2, 3, 1}, {Activation::relu, Activation::sigmoid}, rng);
  Eigen::VectorXd x(2);
  x << 0.9, -0.4;
  int y = 1;

  Tape tape;
  Eigen::VectorXd out = m.forward(x, &tape);
  Eigen::VectorXd delta(1);
  delta(0) = out(0) - static_cast<double>(y);
  MlpGradients grads = MlpGradients::zeros_like(m);
  mlp_backward_from_last_preact(m, tape, delta, &grads);

  auto loss_of_out = [&](double yhat) { return bce_loss(yhat, y); };
  double h = 1e-6;
  for (size_t l = 0; l < m.layers.size(); ++l)
    for (int r = 0; r < m.layers[l].w.rows(); ++r) {
      for (int c = 0; c < m.layers[l].w.cols(); ++c) {
        double fd = fd_loss_over_params(m, static_cast<int>(l), r, c, false, x, loss_of_out, h);
        CHECK(testutil::rel_err(grads.dw[l](r, c), fd) < 1e-6);
      }
      double fd = fd_loss_over_params(m, static_cast<int>(l), r, 0, true, x, loss_of_out, h);
      CHECK(testutil::rel_err(grads.db[l](r), fd) < 1e-6);
    }
}

TEST_CASE("adam updates follow the closed-form schedule") {
  MlpModel m;
  Layer l;
  l.w.resize(1, 1);
  l.w << 2.0;
  l.b.resize(1);
  l.b << -1.0;
  l.act = Activation::identity;
  m.layers = {l};

  double lr = 0.05;
  AdamState adam = AdamState::make(m, lr);
  MlpGradients g = MlpGradients::zeros_like(m);
  g.dw[0](0, 0) = 0.3;
  g.db[0](0) = -0.7;

  auto expected_step = [&](double grad, long t, double& mm, double& vv) {
    mm = 0.9 * mm + 0.1 * grad;
    vv = 0.999 * vv + 0.001 * grad * grad;
    double mhat = mm / (1.0 - std::pow(0.9, static_cast<double>(t)));
    double vhat = vv / (1.0 - std::pow(0.999, static_cast<double>(t)));
    return lr * mhat / (std::sqrt(vhat) + 1e-8);
  };

  double w = 2.0, b = -1.0;
  double mw = 0.0, vw = 0.0, mb = 0.0, vb = 0.0;
  for (long t = 1; t <= 2; ++t) {
    adam.update(m, g);
    w -= expected_step(0.3, t, mw, vw);
    b -= expected_step(-0.7, t, mb, vb);
    CHECK(m.layers[0].w(0, 0) == doctest::Approx(w).epsilon(1e-12));
    CHECK(m.layers[0].b(0) == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("classifier separates a toy code table and is seed-deterministic") {
  Domain domain = Domain::from_cards({2, 3});
  std::vector<DiscreteInstance> rows;
  std::vector<int> labels;
  Rng rng(13);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < 200; ++i) {
    int y = coin(rng);
    DiscreteInstance x(2);
    x[0] = y;
    x[1] = y ? 2 : coin(rng);
    rows.push_back(x);
    labels.push_back(y);
  }
  ClassifierOptions opt;
  opt.epochs = 60;
  opt.seed = 5;
  MlpModel f = train_classifier(rows, labels, domain, opt);
  int correct = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    double s = classifier_score(f, rows[i], domain);
    if ((s >= 0.5) == (labels[i] == 1)) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(rows.size()) >= 0.95);

  MlpModel f2 = train_classifier(rows, labels, domain, opt);
  CHECK(mlp_to_text(f) == mlp_to_text(f2));
}

TEST_CASE("classifier training rejects degenerate inputs") {
  Domain domain = Domain::from_cards({2});
  CHECK_THROWS_AS(train_classifier({}, {}, domain, {}), Error);
  CHECK_THROWS_AS(train_classifier({{0}, {1}}, {1, 1}, domain, {}), Error);
  CHECK_THROWS_AS(train_classifier({{0}}, {1, 0}, domain, {}), Error);
}

TEST_CASE("youden threshold matches an exhaustive grid oracle") {
  Rng rng(14);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      int y = unif(rng) < 0.4 ? 1 : 0;
      double s = y ? 0.3 + 0.7 * unif(rng) : 0.6 * unif(rng);
      scores.push_back(s);
      labels.push_back(y);
    }
    long pos = std::count(labels.begin(), labels.end(), 1);
    long neg = static_cast<long>(labels.size()) - pos;
    if (pos == 0 || neg == 0) continue;
    double best_tau = 0.0, best_j = -2.0;
    for (int k = 1; k <= 99; ++k) {
      double tau = static_cast<double>(k) / 100.0;
      long tp = 0, fp = 0;
      for (size_t i = 0; i < scores.size(); ++i)
        if (scores[i] >= tau) (labels[i] ? tp : fp) += 1;
      double j = static_cast<double>(tp) / pos - static_cast<double>(fp) / neg;
      if (j > best_j) {
        best_j = j;
        best_tau = tau;
      }
    }
    CHECK(select_threshold_youden(scores, labels) == doctest::Approx(best_tau).epsilon(1e-15));
  }
}

TEST_CASE("youden picks the smallest perfect threshold and adapts to skew") {
  // Perfect separation: every tau in (0.2, 0.8] scores J = 1; the grid point
  // 0.21 is the smallest.
  std::vector<double> scores = {0.1, 0.2, 0.8, 0.9};
  std::vector<int> labels = {0, 0, 1, 1};
  CHECK(select_threshold_youden(scores, labels) == doctest::Approx(21.0 / 100.0));

  // Scores compressed toward the bottom: the best cut sits well below 0.5.
  std::vector<double> skewed_scores;
  std::vector<int> skewed_labels;
  Rng rng(15);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    int y = i % 5 == 0 ? 1 : 0;
    double s = y ? 0.15 + 0.2 * unif(rng) : 0.12 * unif(rng);
    skewed_scores.push_back(s);
    skewed_labels.push_back(y);
  }
  double tau = select_threshold_youden(skewed_scores, skewed_labels);
  CHECK(tau < 0.5);
  CHECK(tau >= 0.12);
}

TEST_CASE("model text round-trips bitwise") {
  Rng rng(16);
  MlpModel m = MlpModel::make({4, 6, 3, 1},
                              {Activation::relu, Activation::relu, Activation::sigmoid}, rng);
  std::string text = mlp_to_text(m);
  MlpModel back = mlp_from_text(text);
  CHECK(mlp_to_text(back) == text);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = unif(rng);
    CHECK(m.forward(x)(0) == back.forward(x)(0));
  }

  std::stringstream ss;
  mlp_write(ss, m);
  MlpModel from_stream = mlp_read(ss);
  CHECK(mlp_to_text(from_stream) == text);
}
