#include "par/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace par {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> softmax(std::span<const double> logits) {
  double hi = -kInf;
  for (double v : logits) hi = std::max(hi, v);
  std::vector<double> out(logits.size());
  double norm = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    norm += out[i];
  }
  for (double& v : out) v /= norm;
  return out;
}

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> block_offsets(const std::vector<int>& cards) {
  std::vector<int> offs(cards.size());
  int at = 0;
  for (size_t j = 0; j < cards.size(); ++j) {
    offs[j] = at;
    at += cards[j];
  }
  return offs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pool.

NeighborhoodPool build_pool(const Circuit& p_plus, const MlpModel& f, double tau,
                            const Domain& domain, int target_size, long max_draws, Rng& rng,
                            PoolBuildStats* stats) {
  require(target_size > 0, "build_pool: target size must be positive");
  require(max_draws > 0, "build_pool: max draws must be positive");
  NeighborhoodPool pool;
  long draws = 0;
  while (static_cast<int>(pool.size()) < target_size && draws < max_draws) {
    DiscreteInstance x = p_plus.sample(rng);
    ++draws;
    if (classifier_score(f, x, domain) >= tau) {
      pool.log_p_plus.push_back(p_plus.log_likelihood(x));
      pool.members.push_back(std::move(x));
    }
  }
  if (stats) {
    stats->draws = draws;
    stats->accepted = static_cast<long>(pool.size());
    stats->acceptance_rate = static_cast<double>(pool.size()) / static_cast<double>(draws);
  }
  require(!pool.members.empty(),
          "build_pool: no sample accepted by the classifier after " + std::to_string(draws) +
              " draws (acceptance rate 0); the circuit and classifier disagree or tau is too high");
  return pool;
}

void save_pool(const NeighborhoodPool& pool, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "pool: cannot write " + path);
  out << "parpool 1\n";
  size_t d = pool.members.empty() ? 0 : pool.members.front().size();
  out << "features " << d << "\n";
  out << "count " << pool.size() << "\n";
  for (size_t i = 0; i < pool.size(); ++i) {
    for (int c : pool.members[i]) out << c << ' ';
    out << fmt_g17(pool.log_p_plus[i]) << "\n";
  }
}

NeighborhoodPool load_pool(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "pool: cannot open " + path);
  std::string tok;
  int version = 0;
  in >> tok >> version;
  require(tok == "parpool" && version == 1, "pool: unsupported serialization header");
  size_t d = 0, n = 0;
  in >> tok >> d;
  require(tok == "features", "pool: bad header");
  in >> tok >> n;
  require(tok == "count", "pool: bad header");
  NeighborhoodPool pool;
  for (size_t i = 0; i < n; ++i) {
    DiscreteInstance x(d);
    for (int& c : x) in >> c;
    double ll;
    in >> ll;
    require(!in.fail(), "pool: truncated record");
    pool.members.push_back(std::move(x));
    pool.log_p_plus.push_back(ll);
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Encoder.

EncoderModels EncoderModels::make(Rng& rng, int psi_hidden, int out_dim) {
  EncoderModels e;
  e.psi = MlpModel::make({2, psi_hidden, psi_hidden}, {Activation::relu, Activation::relu}, rng);
  e.rho = MlpModel::make({psi_hidden, out_dim}, {Activation::identity}, rng);
  return e;
}

NeighborhoodEncoding encode_neighborhood(const EncoderModels& enc, const DiscreteInstance& factual,
                                         const NeighborhoodPool& pool, int k) {
  require(pool.size() > 0, "encode_neighborhood: empty pool");
  require(k > 0, "encode_neighborhood: k must be positive");
  size_t k_eff = std::min<size_t>(static_cast<size_t>(k), pool.size());

  std::vector<std::pair<int, int>> order(pool.size());
  for (size_t i = 0; i < pool.size(); ++i)
    order[i] = {hamming(factual, pool.members[i]), static_cast<int>(i)};
  std::nth_element(order.begin(), order.begin() + static_cast<long>(k_eff) - 1, order.end());
  std::sort(order.begin(), order.begin() + static_cast<long>(k_eff));

  NeighborhoodEncoding ctx;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(enc.psi.output_dim());
  for (size_t i = 0; i < k_eff; ++i) {
    int id = order[i].second;
    ctx.neighbor_ids.push_back(id);
    Eigen::VectorXd u(2);
    u(0) = static_cast<double>(order[i].first);
    u(1) = pool.log_p_plus[id];
    Tape tape;
    mean += enc.psi.forward(u, &tape);
    ctx.psi_tapes.push_back(std::move(tape));
  }
  mean /= static_cast<double>(k_eff);
  Eigen::VectorXd h = enc.rho.forward(mean, &ctx.rho_tape);
  ctx.h.assign(h.data(), h.data() + h.size());
  return ctx;
}

void encoder_backward(const EncoderModels& enc, const NeighborhoodEncoding& ctx,
                      const Eigen::VectorXd& dh, MlpGradients& dpsi, MlpGradients& drho) {
  Eigen::VectorXd dmean = mlp_backward(enc.rho, ctx.rho_tape, dh, &drho);
  dmean /= static_cast<double>(ctx.psi_tapes.size());
  for (const Tape& tape : ctx.psi_tapes) mlp_backward(enc.psi, tape, dmean, &dpsi);
}

// ---------------------------------------------------------------------------
// Generator.

MutableLayout mutable_layout(const ConstraintSet& cs) {
  MutableLayout ml;
  ml.offset_of.assign(cs.num_features(), -1);
  for (int j = 0; j < cs.num_features(); ++j) {
    if (cs.immutable[j]) continue;
    ml.offset_of[j] = ml.total;
    ml.features.push_back(j);
    ml.total += cs.cards[j];
  }
  return ml;
}

GeneratorModels GeneratorModels::make(const ConstraintSet& cs, const Domain& domain, Rng& rng,
                                      int hidden, int k_neighbors) {
  require(domain.cards == cs.cards, "GeneratorModels: domain and constraints disagree");
  GeneratorModels g;
  g.enc = EncoderModels::make(rng);
  MutableLayout ml = mutable_layout(cs);
  require(ml.total > 0, "GeneratorModels: no mutable features");
  int imm = 0;
  for (int j = 0; j < cs.num_features(); ++j)
    if (cs.immutable[j]) imm += cs.cards[j];
  int z_dim = imm + 1 + g.enc.rho.output_dim();
  g.gen = MlpModel::make({z_dim, hidden, hidden, ml.total},
                         {Activation::relu, Activation::relu, Activation::identity}, rng);
  g.k_neighbors = k_neighbors;
  return g;
}

void save_generator(const GeneratorModels& g, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "generator: cannot write " + path);
  out << "pargen 1\n";
  out << "k " << g.k_neighbors << "\n";
  out << "psi\n";
  mlp_write(out, g.enc.psi);
  out << "rho\n";
  mlp_write(out, g.enc.rho);
  out << "gen\n";
  mlp_write(out, g.gen);
}

GeneratorModels load_generator(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "generator: cannot open " + path);
  std::string tok;
  int version = 0;
  in >> tok >> version;
  require(tok == "pargen" && version == 1, "generator: unsupported serialization header");
  GeneratorModels g;
  in >> tok >> g.k_neighbors;
  require(tok == "k" && g.k_neighbors > 0, "generator: bad neighbor count");
  in >> tok;
  require(tok == "psi", "generator: missing psi section");
  g.enc.psi = mlp_read(in);
  in >> tok;
  require(tok == "rho", "generator: missing rho section");
  g.enc.rho = mlp_read(in);
  in >> tok;
  require(tok == "gen", "generator: missing gen section");
  g.gen = mlp_read(in);
  return g;
}

GeneratorContext build_generator_context(const DiscreteInstance& factual, const Circuit& p_plus,
                                         const GeneratorModels& g, const NeighborhoodPool& pool,
                                         const ConstraintSet& cs, const Domain& domain) {
  GeneratorContext ctx;
  ctx.factual = factual;
  ctx.log_p_plus_factual = p_plus.log_likelihood(factual);
  ctx.enc = encode_neighborhood(g.enc, factual, pool, g.k_neighbors);
  for (int j = 0; j < cs.num_features(); ++j) {
    if (!cs.immutable[j]) continue;
    std::vector<double> block(cs.cards[j], 0.0);
    block[factual[j]] = 1.0;
    ctx.z.insert(ctx.z.end(), block.begin(), block.end());
  }
  ctx.z.push_back(ctx.log_p_plus_factual);
  ctx.h_offset = static_cast<int>(ctx.z.size());
  ctx.z.insert(ctx.z.end(), ctx.enc.h.begin(), ctx.enc.h.end());
  require(static_cast<int>(ctx.z.size()) == g.gen.input_dim(),
          "build_generator_context: input dim mismatch");
  return ctx;
}

// ---------------------------------------------------------------------------
// Constrained soft head.

SoftRecourse soft_from_logits(std::span<const double> flat_logits, const DiscreteInstance& factual,
                              const ConstraintSet& cs, SoftTape* tape) {
  MutableLayout ml = mutable_layout(cs);
  require(static_cast<int>(flat_logits.size()) == ml.total, "soft_from_logits: logit size mismatch");
  require(static_cast<int>(factual.size()) == cs.num_features(),
          "soft_from_logits: factual arity mismatch");

  SoftRecourse sr;
  sr.factual = factual;
  sr.q.resize(cs.num_features());
  sr.masked_logits.resize(cs.num_features());
  if (tape) {
    tape->joints.clear();
    tape->producer.assign(cs.num_features(), -1);
  }

  auto groups = cs.joint_groups();
  std::set<int> grouped;
  for (const auto& g : groups)
    for (int j : g.members) grouped.insert(j);

  for (int j = 0; j < cs.num_features(); ++j) {
    if (cs.immutable[j]) {
      sr.q[j].assign(cs.cards[j], 0.0);
      sr.q[j][factual[j]] = 1.0;
      continue;
    }
    std::vector<double> lm(flat_logits.begin() + ml.offset_of[j],
                           flat_logits.begin() + ml.offset_of[j] + cs.cards[j]);
    if (cs.monotone[j]) mask_monotone(lm, factual[j]);
    for (const CausalRule& r : cs.rules)
      if (r.effect == j && cs.immutable[r.cause]) mask_causal_clamp(lm, factual[j]);
    sr.masked_logits[j] = std::move(lm);
    if (!grouped.count(j)) sr.q[j] = softmax(sr.masked_logits[j]);
  }

  for (const CausalRule& r : cs.rules) {
    if (cs.immutable[r.effect] || cs.immutable[r.cause]) continue;
    CausalJointResult jr = apply_causal_joint(sr.masked_logits[r.effect], sr.masked_logits[r.cause],
                                              factual[r.effect], factual[r.cause]);
    sr.q[r.effect] = jr.q_effect;
    sr.q[r.cause] = jr.q_cause;
    if (tape) {
      int idx = static_cast<int>(tape->joints.size());
      tape->joints.push_back({r, std::move(jr), false, false});
      tape->producer[r.effect] = idx;
      tape->producer[r.cause] = idx;
    }
  }
  if (tape) {
    for (size_t i = 0; i < tape->joints.size(); ++i) {
      auto& rec = tape->joints[i];
      rec.cause_survives = tape->producer[rec.rule.cause] == static_cast<int>(i);
      rec.effect_survives = tape->producer[rec.rule.effect] == static_cast<int>(i);
    }
  }
  return sr;
}

std::vector<double> soft_backward(const SoftTape& tape, const SoftRecourse& sr,
                                  const std::vector<std::vector<double>>& dq,
                                  const ConstraintSet& cs) {
  MutableLayout ml = mutable_layout(cs);
  std::vector<double> out(ml.total, 0.0);
  for (int j : ml.features) {
    if (tape.producer[j] != -1) continue;
    const auto& q = sr.q[j];
    const auto& g = dq[j];
    double s = 0.0;
    for (size_t c = 0; c < q.size(); ++c) s += q[c] * g[c];
    for (size_t c = 0; c < q.size(); ++c) out[ml.offset_of[j] + c] = q[c] * (g[c] - s);
  }
  for (const auto& rec : tape.joints) {
    const auto& jr = rec.jr;
    int cc = jr.cause_card, ce = jr.effect_card;
    const std::vector<double>* gc = rec.cause_survives ? &dq[rec.rule.cause] : nullptr;
    const std::vector<double>* ge = rec.effect_survives ? &dq[rec.rule.effect] : nullptr;
    if (!gc && !ge) continue;
    double s = 0.0;
    if (gc)
      for (int a = 0; a < cc; ++a) s += jr.q_cause[a] * (*gc)[a];
    if (ge)
      for (int b = 0; b < ce; ++b) s += jr.q_effect[b] * (*ge)[b];
    int off_c = ml.offset_of[rec.rule.cause];
    int off_e = ml.offset_of[rec.rule.effect];
    for (int a = 0; a < cc; ++a) {
      double ga = gc ? (*gc)[a] : 0.0;
      for (int b = 0; b < ce; ++b) {
        double gb = ge ? (*ge)[b] : 0.0;
        double dm = jr.at(a, b) * (ga + gb - s);
        out[off_c + a] += dm;
        out[off_e + b] += dm;
      }
    }
  }
  return out;
}

SoftRecourse generate_soft(const GeneratorModels& g, const GeneratorContext& ctx,
                           const ConstraintSet& cs, SoftTape* tape, Tape* gen_tape) {
  Eigen::Map<const Eigen::VectorXd> zv(ctx.z.data(), static_cast<Eigen::Index>(ctx.z.size()));
  Eigen::VectorXd logits = g.gen.forward(zv, gen_tape);
  std::span<const double> flat(logits.data(), static_cast<size_t>(logits.size()));
  return soft_from_logits(flat, ctx.factual, cs, tape);
}

double total_change_probability(const SoftRecourse& sr, const ConstraintSet& cs) {
  double acc = 0.0;
  for (int j = 0; j < cs.num_features(); ++j)
    if (!cs.immutable[j]) acc += 1.0 - sr.q[j][sr.factual[j]];
  return acc;
}

DiscreteInstance decode(const SoftRecourse& sr, const ConstraintSet& cs) {
  DiscreteInstance out = sr.factual;
  auto groups = cs.joint_groups();
  std::set<int> grouped;
  for (const auto& g : groups)
    for (int j : g.members) grouped.insert(j);

  for (int j = 0; j < cs.num_features(); ++j) {
    if (cs.immutable[j] || grouped.count(j)) continue;
    const auto& q = sr.q[j];
    int best = 0;
    for (int c = 1; c < static_cast<int>(q.size()); ++c)
      if (q[c] > q[best]) best = c;
    out[j] = best;
  }

  for (const auto& g : groups) {
    std::vector<std::vector<int>> cands;
    for (int j : g.members) {
      std::vector<int> cand;
      for (int c = 0; c < cs.cards[j]; ++c)
        if (sr.masked_logits[j][c] > kMaskedLogit / 2) cand.push_back(c);
      require(!cand.empty(), "decode: every category masked");
      cands.push_back(std::move(cand));
    }
    std::vector<size_t> at(g.members.size(), 0);
    std::vector<int> best_combo;
    double best_score = -kInf;
    while (true) {
      double score = 0.0;
      std::vector<int> combo(g.members.size());
      for (size_t m = 0; m < g.members.size(); ++m) {
        combo[m] = cands[m][at[m]];
        score += sr.masked_logits[g.members[m]][combo[m]];
      }
      bool legal = true;
      for (const CausalRule& r : g.rules) {
        int me = static_cast<int>(std::find(g.members.begin(), g.members.end(), r.effect) -
                                  g.members.begin());
        int mc = static_cast<int>(std::find(g.members.begin(), g.members.end(), r.cause) -
                                  g.members.begin());
        if (combo[me] > sr.factual[r.effect] && !(combo[mc] > sr.factual[r.cause])) {
          legal = false;
          break;
        }
      }
      if (legal && score > best_score) {
        best_score = score;
        best_combo = combo;
      }
      size_t m = g.members.size();
      while (m > 0 && ++at[m - 1] == cands[m - 1].size()) {
        at[m - 1] = 0;
        --m;
      }
      if (m == 0) break;
    }
    require(!best_combo.empty(), "decode: no legal assignment in causal group");
    for (size_t m = 0; m < g.members.size(); ++m) out[g.members[m]] = best_combo[m];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective.

LossBreakdown compute_losses(const SoftRecourse& sr, const SoftTape& tape, const MlpModel& f,
                             const Circuit& p_plus, const Circuit& p_minus,
                             const ConstraintSet& cs, const LossWeights& w,
                             std::vector<double>* dlogits, double clip_minus_norm) {
  MutableLayout ml = mutable_layout(cs);
  int num_mut = static_cast<int>(ml.features.size());
  require(num_mut > 0, "compute_losses: no mutable features");
  std::vector<int> offs = block_offsets(cs.cards);

  double w_val = w.enable_val ? w.lambda_val : 0.0;
  double group = w.enable_ppt ? w.lambda_ppt : 0.0;
  double w_prox = w.enable_prox ? group * w.alpha : 0.0;
  double w_plus = w.enable_plus ? group * (1.0 - w.alpha) * w.lambda_plus : 0.0;
  double w_minus = w.enable_minus ? group * (1.0 - w.alpha) * w.lambda_minus : 0.0;
  double w_sparse = w.enable_sparse ? w.lambda_sparse : 0.0;
  double w_ent = w.enable_ent ? w.lambda_ent : 0.0;

  bool want_grad = dlogits != nullptr;
  std::vector<std::vector<double>> dq, dq_minus;
  if (want_grad) {
    dq.resize(cs.num_features());
    for (int j = 0; j < cs.num_features(); ++j) dq[j].assign(cs.cards[j], 0.0);
  }

  LossBreakdown out;

  // Validity: cross-entropy of the classifier's soft acceptance against 1.
  int total_dim = offs.back() + cs.cards.back();
  std::vector<double> v(total_dim, 0.0);
  for (int j = 0; j < cs.num_features(); ++j)
    for (int c = 0; c < cs.cards[j]; ++c) v[offs[j] + c] = sr.q[j][c];
  Tape ftape;
  Eigen::Map<const Eigen::VectorXd> vv(v.data(), static_cast<Eigen::Index>(v.size()));
  Eigen::VectorXd fout = f.forward(vv, want_grad || true ? &ftape : nullptr);
  double yhat = std::clamp(fout(0), 1e-12, 1.0 - 1e-12);
  out.validity = -std::log(yhat);
  if (want_grad && w_val != 0.0) {
    Eigen::VectorXd dout(1);
    dout(0) = -1.0 / yhat;
    Eigen::VectorXd dinput = mlp_backward(f, ftape, dout, nullptr);
    for (int j : ml.features)
      for (int c = 0; c < cs.cards[j]; ++c) dq[j][c] += w_val * dinput(offs[j] + c);
  }

  // Proximity: squared hinge on expected mutable changes over the budget.
  double sum_pi = total_change_probability(sr, cs);
  double hinge = std::max(0.0, sum_pi - w.budget);
  out.proximity = hinge * hinge;
  if (want_grad && w_prox != 0.0 && hinge > 0.0) {
    for (int j : ml.features) dq[j][sr.factual[j]] += w_prox * (-2.0 * hinge);
  }

  // Sparsity: mean negative log mass kept on the factual categories.
  double sparse = 0.0;
  for (int j : ml.features) {
    double qf = std::max(sr.q[j][sr.factual[j]], 1e-12);
    sparse += -std::log(qf);
    if (want_grad && w_sparse != 0.0)
      dq[j][sr.factual[j]] += w_sparse * (-1.0 / qf) / static_cast<double>(num_mut);
  }
  out.sparsity = sparse / static_cast<double>(num_mut);

  // Entropy: mean Shannon entropy of the mutable blocks.
  double ent = 0.0;
  for (int j : ml.features) {
    for (int c = 0; c < cs.cards[j]; ++c) {
      double qc = sr.q[j][c];
      if (qc <= 0.0) continue;
      ent += -qc * std::log(qc);
      if (want_grad && w_ent != 0.0)
        dq[j][c] += w_ent * (-(std::log(qc) + 1.0)) / static_cast<double>(num_mut);
    }
  }
  out.entropy = ent / static_cast<double>(num_mut);

  // Plausibility attraction / repulsion through the circuits.
  SoftInstance si;
  si.q = sr.q;
  if (w_plus != 0.0) {
    out.plaus_plus = -p_plus.soft_value(si);
    if (want_grad) {
      auto g = p_plus.soft_gradient(si);
      for (int j : ml.features)
        for (int c = 0; c < cs.cards[j]; ++c) dq[j][c] += w_plus * (-g[j][c]);
    }
  }
  if (w_minus != 0.0) {
    out.plaus_minus = p_minus.soft_value(si);
    if (want_grad) {
      auto g = p_minus.soft_gradient(si);
      dq_minus.resize(cs.num_features());
      for (int j = 0; j < cs.num_features(); ++j) dq_minus[j].assign(cs.cards[j], 0.0);
      for (int j : ml.features)
        for (int c = 0; c < cs.cards[j]; ++c) dq_minus[j][c] = g[j][c];
    }
  }

  out.total = w_val * out.validity + w_prox * out.proximity + w_plus * out.plaus_plus +
              w_minus * out.plaus_minus + w_sparse * out.sparsity + w_ent * out.entropy;

  if (want_grad) {
    if (w_minus != 0.0 && clip_minus_norm > 0.0) {
      std::vector<double> base = soft_backward(tape, sr, dq, cs);
      std::vector<double> dm = soft_backward(tape, sr, dq_minus, cs);
      double norm = 0.0;
      for (double g : dm) norm += g * g;
      norm = std::sqrt(norm);
      double scale = (norm > clip_minus_norm) ? clip_minus_norm / norm : 1.0;
      for (size_t i = 0; i < base.size(); ++i) base[i] += w_minus * scale * dm[i];
      *dlogits = std::move(base);
    } else {
      if (w_minus != 0.0) {
        for (int j : ml.features)
          for (int c = 0; c < cs.cards[j]; ++c) dq[j][c] += w_minus * dq_minus[j][c];
      }
      *dlogits = soft_backward(tape, sr, dq, cs);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

GenTrainLog train_generator(GeneratorModels& g, const Circuit& p_plus, const Circuit& p_minus,
                            const MlpModel& f, double tau, const ConstraintSet& cs,
                            const Domain& domain, const NeighborhoodPool& pool,
                            const LossWeights& w, const TrainGenOptions& opt, Rng& rng) {
  require(opt.epochs >= 0 && opt.steps_per_epoch > 0 && opt.batch > 0,
          "train_generator: bad options");
  MutableLayout ml = mutable_layout(cs);
  require(g.gen.output_dim() == ml.total, "train_generator: generator output does not match layout");

  AdamState adam_gen = AdamState::make(g.gen, opt.lr);
  AdamState adam_psi = AdamState::make(g.enc.psi, opt.lr);
  AdamState adam_rho = AdamState::make(g.enc.rho, opt.lr);
  MlpGradients grad_gen = MlpGradients::zeros_like(g.gen);
  MlpGradients grad_psi = MlpGradients::zeros_like(g.enc.psi);
  MlpGradients grad_rho = MlpGradients::zeros_like(g.enc.rho);

  auto draw_denied = [&]() {
    for (long attempt = 0; attempt < opt.draw_attempts_per_sample; ++attempt) {
      DiscreteInstance x = p_minus.sample(rng);
      if (classifier_score(f, x, domain) < tau) return x;
    }
    fail("train_generator: could not draw a denied surrogate from p- within " +
         std::to_string(opt.draw_attempts_per_sample) + " attempts; tau and p- disagree");
  };

  GenTrainLog log;
  SoftTape stape;
  Tape gtape;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    LossBreakdown epoch_mean;
    long counted = 0;
    for (int step = 0; step < opt.steps_per_epoch; ++step) {
      grad_gen.zero();
      grad_psi.zero();
      grad_rho.zero();
      for (int b = 0; b < opt.batch; ++b) {
        DiscreteInstance x = draw_denied();
        GeneratorContext ctx = build_generator_context(x, p_plus, g, pool, cs, domain);
        SoftRecourse sr = generate_soft(g, ctx, cs, &stape, &gtape);
        std::vector<double> dlogits;
        LossBreakdown lb =
            compute_losses(sr, stape, f, p_plus, p_minus, cs, w, &dlogits, opt.clip_minus_norm);
        epoch_mean.validity += lb.validity;
        epoch_mean.proximity += lb.proximity;
        epoch_mean.sparsity += lb.sparsity;
        epoch_mean.entropy += lb.entropy;
        epoch_mean.plaus_plus += lb.plaus_plus;
        epoch_mean.plaus_minus += lb.plaus_minus;
        epoch_mean.total += lb.total;
        ++counted;

        Eigen::Map<const Eigen::VectorXd> dl(dlogits.data(),
                                             static_cast<Eigen::Index>(dlogits.size()));
        Eigen::VectorXd dz = mlp_backward(g.gen, gtape, dl, &grad_gen);
        Eigen::VectorXd dh = dz.segment(ctx.h_offset, g.enc.rho.output_dim());
        encoder_backward(g.enc, ctx.enc, dh, grad_psi, grad_rho);
      }
      double inv = 1.0 / static_cast<double>(opt.batch);
      grad_gen.scale(inv);
      grad_psi.scale(inv);
      grad_rho.scale(inv);
      adam_gen.update(g.gen, grad_gen);
      adam_psi.update(g.enc.psi, grad_psi);
      adam_rho.update(g.enc.rho, grad_rho);
    }
    if (counted > 0) {
      double inv = 1.0 / static_cast<double>(counted);
      epoch_mean.validity *= inv;
      epoch_mean.proximity *= inv;
      epoch_mean.sparsity *= inv;
      epoch_mean.entropy *= inv;
      epoch_mean.plaus_plus *= inv;
      epoch_mean.plaus_minus *= inv;
      epoch_mean.total *= inv;
    }
    log.per_epoch.push_back(epoch_mean);
  }
  return log;
}

}  // namespace par
