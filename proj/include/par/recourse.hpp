#pragma once

#include <span>
#include <vector>

#include "par/circuit.hpp"
#include "par/classifier.hpp"
#include "par/constraints.hpp"
#include "par/mlp.hpp"
#include "par/numeric.hpp"

namespace par {

// ---------------------------------------------------------------------------
// Neighborhood pool: accepted-class samples drawn from p+ and kept when the
// classifier agrees, with cached log-likelihoods.

struct NeighborhoodPool {
  std::vector<DiscreteInstance> members;
  std::vector<double> log_p_plus;
  size_t size() const { return members.size(); }
};

struct PoolBuildStats {
  long draws = 0;
  long accepted = 0;
  double acceptance_rate = 0.0;
};

NeighborhoodPool build_pool(const Circuit& p_plus, const MlpModel& f, double tau,
                            const Domain& domain, int target_size, long max_draws, Rng& rng,
                            PoolBuildStats* stats = nullptr);

void save_pool(const NeighborhoodPool& pool, const std::string& path);
NeighborhoodPool load_pool(const std::string& path);

// ---------------------------------------------------------------------------
// Neighborhood encoder: descriptors (Hamming distance, neighbor log p+) pushed
// through a shared MLP, mean-pooled, then linearly projected.

struct EncoderModels {
  MlpModel psi;  // 2 -> 16 -> 16, relu
  MlpModel rho;  // 16 -> 8, linear

  static EncoderModels make(Rng& rng, int psi_hidden = 16, int out_dim = 8);
};

struct NeighborhoodEncoding {
  std::vector<int> neighbor_ids;
  std::vector<double> h;
  std::vector<Tape> psi_tapes;
  Tape rho_tape;
};

NeighborhoodEncoding encode_neighborhood(const EncoderModels& enc, const DiscreteInstance& factual,
                                         const NeighborhoodPool& pool, int k);
// Backpropagates d(loss)/dh into both encoder nets.
void encoder_backward(const EncoderModels& enc, const NeighborhoodEncoding& ctx,
                      const Eigen::VectorXd& dh, MlpGradients& dpsi, MlpGradients& drho);

// ---------------------------------------------------------------------------
// Generator: maps [one-hot immutables | log p+(x-) | h] to one logit block per
// mutable feature.

struct MutableLayout {
  std::vector<int> features;    // mutable feature ids, ascending
  std::vector<int> offset_of;   // per feature: offset into the flat logits, -1 if immutable
  int total = 0;
};
MutableLayout mutable_layout(const ConstraintSet& cs);

struct GeneratorModels {
  EncoderModels enc;
  MlpModel gen;
  int k_neighbors = 5;

  static GeneratorModels make(const ConstraintSet& cs, const Domain& domain, Rng& rng,
                              int hidden = 128, int k_neighbors = 5);
};

void save_generator(const GeneratorModels& g, const std::string& path);
GeneratorModels load_generator(const std::string& path);

struct GeneratorContext {
  DiscreteInstance factual;
  double log_p_plus_factual = 0.0;
  NeighborhoodEncoding enc;
  std::vector<double> z;
  int h_offset = 0;  // where the encoding starts inside z
};

GeneratorContext build_generator_context(const DiscreteInstance& factual, const Circuit& p_plus,
                                         const GeneratorModels& g, const NeighborhoodPool& pool,
                                         const ConstraintSet& cs, const Domain& domain);

// ---------------------------------------------------------------------------
// Constrained soft head: per-feature masks, softmax (joint over causally tied
// pairs with marginalization), and the records needed for the exact backward.

struct SoftRecourse {
  DiscreteInstance factual;
  std::vector<std::vector<double>> q;              // every feature; immutables are one-hot
  std::vector<std::vector<double>> masked_logits;  // mutable features only
};

struct SoftTape {
  struct JointRec {
    CausalRule rule;
    CausalJointResult jr;
    bool cause_survives = false;
    bool effect_survives = false;
  };
  std::vector<JointRec> joints;
  std::vector<int> producer;  // per feature: index into joints, -1 for plain softmax
};

// Pure function from flat mutable logits to the constrained soft candidate.
SoftRecourse soft_from_logits(std::span<const double> flat_logits, const DiscreteInstance& factual,
                              const ConstraintSet& cs, SoftTape* tape = nullptr);
// d(loss)/dq -> d(loss)/d(flat logits) through masks, softmaxes and joints.
std::vector<double> soft_backward(const SoftTape& tape, const SoftRecourse& sr,
                                  const std::vector<std::vector<double>>& dq,
                                  const ConstraintSet& cs);

// Forward through the generator net plus the constrained head.
SoftRecourse generate_soft(const GeneratorModels& g, const GeneratorContext& ctx,
                           const ConstraintSet& cs, SoftTape* tape = nullptr,
                           Tape* gen_tape = nullptr);

// Sum over mutable features of the probability of leaving the factual code.
double total_change_probability(const SoftRecourse& sr, const ConstraintSet& cs);

// MAP-style decoding: per-feature argmax, joint argmax over causally tied
// groups; guaranteed feasible against the factual.
DiscreteInstance decode(const SoftRecourse& sr, const ConstraintSet& cs);

// ---------------------------------------------------------------------------
// Objective.

struct LossWeights {
  double lambda_val = 1.0;
  double lambda_ppt = 1.0;
  double alpha = 0.5;
  double lambda_plus = 1.0;
  double lambda_minus = 0.1;
  double lambda_sparse = 0.1;
  double lambda_ent = 0.05;
  double budget = 4.0;

  bool enable_val = true;
  bool enable_ppt = true;
  bool enable_prox = true;
  bool enable_plus = true;
  bool enable_minus = true;
  bool enable_sparse = true;
  bool enable_ent = true;
};

struct LossBreakdown {
  double validity = 0.0;
  double proximity = 0.0;
  double sparsity = 0.0;
  double entropy = 0.0;
  double plaus_plus = 0.0;
  double plaus_minus = 0.0;
  double total = 0.0;
};

// Evaluates the weighted objective; when dlogits is non-null it receives the
// exact gradient w.r.t. the flat mutable logits. clip_minus_norm > 0 clips the
// raw repulsion-term gradient (training-time modification, off for exactness).
LossBreakdown compute_losses(const SoftRecourse& sr, const SoftTape& tape, const MlpModel& f,
                             const Circuit& p_plus, const Circuit& p_minus,
                             const ConstraintSet& cs, const LossWeights& w,
                             std::vector<double>* dlogits = nullptr,
                             double clip_minus_norm = 0.0);

// ---------------------------------------------------------------------------
// Training.

struct TrainGenOptions {
  int epochs = 40;
  int steps_per_epoch = 25;
  int batch = 64;
  double lr = 1e-3;
  double clip_minus_norm = 10.0;
  long draw_attempts_per_sample = 2000;
};

struct GenTrainLog {
  std::vector<LossBreakdown> per_epoch;  // batch-mean loss terms
};

// Amortized training against denied surrogates sampled from p-; touches only
// the trained models, the frozen phase-one models and the constraint set.
GenTrainLog train_generator(GeneratorModels& g, const Circuit& p_plus, const Circuit& p_minus,
                            const MlpModel& f, double tau, const ConstraintSet& cs,
                            const Domain& domain, const NeighborhoodPool& pool,
                            const LossWeights& w, const TrainGenOptions& opt, Rng& rng);

}  // namespace par
