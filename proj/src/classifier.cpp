#include "par/classifier.hpp"

#include <algorithm>
#include <numeric>

namespace par {

MlpModel train_classifier(const std::vector<DiscreteInstance>& rows, const std::vector<int>& labels,
                          const Domain& domain, const ClassifierOptions& opt) {
  require(!rows.empty(), "train_classifier: no rows");
  require(rows.size() == labels.size(), "train_classifier: label count mismatch");
  bool has_pos = false, has_neg = false;
  for (int y : labels) (y ? has_pos : has_neg) = true;
  require(has_pos && has_neg, "train_classifier: training labels are single-class");
  require(opt.epochs > 0 && opt.batch > 0, "train_classifier: bad options");

  Rng rng(opt.seed);
  std::vector<int> dims = {domain.dim()};
  std::vector<Activation> acts;
  for (int h : opt.hidden) {
    dims.push_back(h);
    acts.push_back(Activation::relu);
  }
  dims.push_back(1);
  acts.push_back(Activation::sigmoid);
  MlpModel f = MlpModel::make(dims, acts, rng);

  AdamState adam = AdamState::make(f, opt.lr);
  MlpGradients grads = MlpGradients::zeros_like(f);
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  Tape tape;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(opt.batch)) {
      size_t end = std::min(order.size(), at + static_cast<size_t>(opt.batch));
      grads.zero();
      for (size_t i = at; i < end; ++i) {
        int r = order[i];
        std::vector<double> x = one_hot(rows[r], domain);
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::VectorXd out = f.forward(xv, &tape);
        // Cross-entropy through the sigmoid: the pre-activation delta is
        // prediction minus label.
        Eigen::VectorXd delta(1);
        delta(0) = out(0) - static_cast<double>(labels[r]);
        mlp_backward_from_last_preact(f, tape, delta, &grads);
      }
      grads.scale(1.0 / static_cast<double>(end - at));
      adam.update(f, grads);
    }
  }
  return f;
}

double classifier_score(const MlpModel& f, std::span<const double> onehot) {
  Eigen::Map<const Eigen::VectorXd> xv(onehot.data(), static_cast<Eigen::Index>(onehot.size()));
  Eigen::VectorXd out = f.forward(xv);
  require(out.size() == 1, "classifier_score: model output is not scalar");
  return std::clamp(out(0), 1e-12, 1.0 - 1e-12);
}

double classifier_score(const MlpModel& f, const DiscreteInstance& x, const Domain& domain) {
  std::vector<double> v = one_hot(x, domain);
  return classifier_score(f, v);
}

double select_threshold_youden(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "select_threshold_youden: size mismatch");
  require(!scores.empty(), "select_threshold_youden: empty input");
  long pos = std::count(labels.begin(), labels.end(), 1);
  long neg = static_cast<long>(labels.size()) - pos;
  require(pos > 0 && neg > 0, "select_threshold_youden: both classes required");

  double best_tau = 0.0;
  double best_j = -2.0;
  for (int k = 1; k <= 99; ++k) {
    double tau = static_cast<double>(k) / 100.0;
    long tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= tau) (labels[i] ? tp : fp) += 1;
    }
    double j = static_cast<double>(tp) / static_cast<double>(pos) -
               static_cast<double>(fp) / static_cast<double>(neg);
    if (j > best_j) {
      best_j = j;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace par
