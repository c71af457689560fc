#include "par/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace par {

using json = nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned long mix_seed(unsigned long seed, unsigned long salt) {
  return seed * 6364136223846793005ULL + salt * 1442695040888963407ULL + 1ULL;
}

Table subset_rows(const Table& t, const std::vector<int>& idx) {
  Table out;
  out.columns = t.columns;
  out.rows.reserve(idx.size());
  for (int i : idx) out.rows.push_back(t.rows[i]);
  return out;
}

json weights_to_json(const LossWeights& w) {
  return json{{"lambda_val", w.lambda_val},     {"lambda_ppt", w.lambda_ppt},
              {"alpha", w.alpha},               {"lambda_plus", w.lambda_plus},
              {"lambda_minus", w.lambda_minus}, {"lambda_sparse", w.lambda_sparse},
              {"lambda_ent", w.lambda_ent},     {"budget", w.budget},
              {"enable_val", w.enable_val},     {"enable_ppt", w.enable_ppt},
              {"enable_prox", w.enable_prox},   {"enable_plus", w.enable_plus},
              {"enable_minus", w.enable_minus}, {"enable_sparse", w.enable_sparse},
              {"enable_ent", w.enable_ent}};
}

void weights_from_json(const json& j, LossWeights& w) {
  w.lambda_val = j.value("lambda_val", w.lambda_val);
  w.lambda_ppt = j.value("lambda_ppt", w.lambda_ppt);
  w.alpha = j.value("alpha", w.alpha);
  w.lambda_plus = j.value("lambda_plus", w.lambda_plus);
  w.lambda_minus = j.value("lambda_minus", w.lambda_minus);
  w.lambda_sparse = j.value("lambda_sparse", w.lambda_sparse);
  w.lambda_ent = j.value("lambda_ent", w.lambda_ent);
  w.budget = j.value("budget", w.budget);
  w.enable_val = j.value("enable_val", w.enable_val);
  w.enable_ppt = j.value("enable_ppt", w.enable_ppt);
  w.enable_prox = j.value("enable_prox", w.enable_prox);
  w.enable_plus = j.value("enable_plus", w.enable_plus);
  w.enable_minus = j.value("enable_minus", w.enable_minus);
  w.enable_sparse = j.value("enable_sparse", w.enable_sparse);
  w.enable_ent = j.value("enable_ent", w.enable_ent);
}

json mean_std_json(const MeanStd& ms) { return json{{"mean", ms.mean}, {"std", ms.std}}; }

json fold_metrics_json(const FoldMetrics& m) {
  json j{{"validity_pct", m.validity_pct}, {"actionability_pct", m.actionability_pct},
         {"nll_mean", m.nll_mean},         {"similarity_mean", m.similarity_mean},
         {"sparsity_mean", m.sparsity_mean}, {"mean_yhat", m.mean_yhat},
         {"count", m.count}};
  if (m.causality_pct) j["causality_pct"] = *m.causality_pct;
  return j;
}

json aggregate_json(const AggregateMetrics& a) {
  json j{{"validity_pct", mean_std_json(a.validity_pct)},
         {"actionability_pct", mean_std_json(a.actionability_pct)},
         {"nll", mean_std_json(a.nll)},
         {"similarity", mean_std_json(a.similarity)},
         {"sparsity", mean_std_json(a.sparsity)},
         {"mean_yhat", mean_std_json(a.mean_yhat)},
         {"folds", a.folds}};
  if (a.causality_pct) j["causality_pct"] = mean_std_json(*a.causality_pct);
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.dataset_csv = j.value("dataset_csv", c.dataset_csv);
  c.schema_json = j.value("schema_json", c.schema_json);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.folds = j.value("folds", c.folds);
  c.max_denied = j.value("max_denied", c.max_denied);
  std::string tp = j.value("tau_policy", std::string("fixed"));
  if (tp == "fixed")
    c.tau_policy = TauPolicy::fixed;
  else if (tp == "youden")
    c.tau_policy = TauPolicy::youden;
  else
    fail("config: unknown tau_policy '" + tp + "'");
  c.fixed_tau = j.value("fixed_tau", c.fixed_tau);
  if (j.contains("discretizer")) {
    const json& d = j["discretizer"];
    c.disc.bins_per_numeric = d.value("bins_per_numeric", c.disc.bins_per_numeric);
    c.disc.discrete_cardinality_threshold =
        d.value("discrete_cardinality_threshold", c.disc.discrete_cardinality_threshold);
  }
  if (j.contains("classifier")) {
    const json& d = j["classifier"];
    if (d.contains("hidden")) c.clf.hidden = d["hidden"].get<std::vector<int>>();
    c.clf.epochs = d.value("epochs", c.clf.epochs);
    c.clf.batch = d.value("batch", c.clf.batch);
    c.clf.lr = d.value("lr", c.clf.lr);
  }
  if (j.contains("circuit")) {
    const json& d = j["circuit"];
    c.pc.min_rows = d.value("min_rows", c.pc.min_rows);
    c.pc.min_cols = d.value("min_cols", c.pc.min_cols);
    c.pc.leaf_alpha = d.value("leaf_alpha", c.pc.leaf_alpha);
    c.pc.independence_alpha = d.value("independence_alpha", c.pc.independence_alpha);
    c.pc.kmeans_restarts = d.value("kmeans_restarts", c.pc.kmeans_restarts);
    c.pc.kmeans_iters = d.value("kmeans_iters", c.pc.kmeans_iters);
    c.pc.weight_floor = d.value("weight_floor", c.pc.weight_floor);
  }
  if (j.contains("pool")) {
    const json& d = j["pool"];
    c.pool.size = d.value("size", c.pool.size);
    c.pool.max_draw_factor = d.value("max_draw_factor", c.pool.max_draw_factor);
  }
  if (j.contains("generator")) {
    const json& d = j["generator"];
    c.gen.train.epochs = d.value("epochs", c.gen.train.epochs);
    c.gen.train.steps_per_epoch = d.value("steps_per_epoch", c.gen.train.steps_per_epoch);
    c.gen.train.batch = d.value("batch", c.gen.train.batch);
    c.gen.train.lr = d.value("lr", c.gen.train.lr);
    c.gen.train.clip_minus_norm = d.value("clip_minus_norm", c.gen.train.clip_minus_norm);
    c.gen.train.draw_attempts_per_sample =
        d.value("draw_attempts_per_sample", c.gen.train.draw_attempts_per_sample);
    c.gen.hidden = d.value("hidden", c.gen.hidden);
    c.gen.k_neighbors = d.value("k_neighbors", c.gen.k_neighbors);
  }
  if (j.contains("weights")) weights_from_json(j["weights"], c.weights);
  c.local_search = j.value("local_search", c.local_search);
  if (j.contains("delta_max") && !j["delta_max"].is_null())
    c.delta_max = j["delta_max"].get<double>();
  c.cross_model = j.value("cross_model", c.cross_model);
  return c;
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["dataset_csv"] = dataset_csv;
  j["schema_json"] = schema_json;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["folds"] = folds;
  j["max_denied"] = max_denied;
  j["tau_policy"] = tau_policy == TauPolicy::fixed ? "fixed" : "youden";
  j["fixed_tau"] = fixed_tau;
  j["discretizer"] = {{"bins_per_numeric", disc.bins_per_numeric},
                      {"discrete_cardinality_threshold", disc.discrete_cardinality_threshold}};
  j["classifier"] = {
      {"hidden", clf.hidden}, {"epochs", clf.epochs}, {"batch", clf.batch}, {"lr", clf.lr}};
  j["circuit"] = {{"min_rows", pc.min_rows},
                  {"min_cols", pc.min_cols},
                  {"leaf_alpha", pc.leaf_alpha},
                  {"independence_alpha", pc.independence_alpha},
                  {"kmeans_restarts", pc.kmeans_restarts},
                  {"kmeans_iters", pc.kmeans_iters},
                  {"weight_floor", pc.weight_floor}};
  j["pool"] = {{"size", pool.size}, {"max_draw_factor", pool.max_draw_factor}};
  j["generator"] = {{"epochs", gen.train.epochs},
                    {"steps_per_epoch", gen.train.steps_per_epoch},
                    {"batch", gen.train.batch},
                    {"lr", gen.train.lr},
                    {"clip_minus_norm", gen.train.clip_minus_norm},
                    {"draw_attempts_per_sample", gen.train.draw_attempts_per_sample},
                    {"hidden", gen.hidden},
                    {"k_neighbors", gen.k_neighbors}};
  j["weights"] = weights_to_json(weights);
  j["local_search"] = local_search;
  if (delta_max)
    j["delta_max"] = *delta_max;
  else
    j["delta_max"] = nullptr;
  j["cross_model"] = cross_model;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "config: cannot write " + path);
  out << to_json_text() << "\n";
}

FoldPlan FoldPlan::make(int n, int k, unsigned long seed) {
  require(n >= k && k >= 1, "FoldPlan: need at least one row per fold");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  FoldPlan plan;
  plan.train_idx.resize(k);
  plan.test_idx.resize(k);
  for (int f = 0; f < k; ++f) {
    long lo = static_cast<long>(f) * n / k;
    long hi = static_cast<long>(f + 1) * n / k;
    for (long i = 0; i < n; ++i)
      (i >= lo && i < hi ? plan.test_idx[f] : plan.train_idx[f]).push_back(idx[i]);
  }
  return plan;
}

FoldContext build_fold_context(const ExperimentConfig& cfg, const Table& table,
                               const Schema& schema, const FoldPlan& plan, int fold) {
  auto t0 = std::chrono::steady_clock::now();
  FoldContext ctx;
  Table train = subset_rows(table, plan.train_idx[fold]);
  Table test = subset_rows(table, plan.test_idx[fold]);

  ctx.disc = Discretizer::fit(train, schema, cfg.disc);
  ctx.diag = ctx.disc.diagnostics(test);

  std::vector<int> cards;
  for (const FeatureDomain& fd : ctx.disc.features()) {
    cards.push_back(fd.cardinality());
    ctx.ordered.push_back(fd.ordered);
  }
  ctx.domain = Domain::from_cards(cards);
  ctx.cs = build_constraints(schema, ctx.disc, cfg.weights.budget);

  ctx.train_rows = ctx.disc.transform(train);
  std::vector<int> train_labels = ctx.disc.labels(train);
  ctx.mad = mad_weights(ctx.train_rows);

  ClassifierOptions clf_opt = cfg.clf;
  clf_opt.seed = mix_seed(cfg.seed, 11 + static_cast<unsigned long>(fold));
  if (cfg.tau_policy == TauPolicy::fixed) {
    ctx.f = train_classifier(ctx.train_rows, train_labels, ctx.domain, clf_opt);
    ctx.tau = cfg.fixed_tau;
  } else {
    Rng split_rng(mix_seed(cfg.seed, 17 + static_cast<unsigned long>(fold)));
    std::vector<int> order(ctx.train_rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), split_rng);
    size_t cut = order.size() - order.size() / 5;
    std::vector<DiscreteInstance> fit_rows;
    std::vector<int> fit_labels;
    std::vector<int> val_ids(order.begin() + static_cast<long>(cut), order.end());
    for (size_t i = 0; i < cut; ++i) {
      fit_rows.push_back(ctx.train_rows[order[i]]);
      fit_labels.push_back(train_labels[order[i]]);
    }
    ctx.f = train_classifier(fit_rows, fit_labels, ctx.domain, clf_opt);
    std::vector<double> scores;
    std::vector<int> val_labels;
    for (int i : val_ids) {
      scores.push_back(classifier_score(ctx.f, ctx.train_rows[i], ctx.domain));
      val_labels.push_back(train_labels[i]);
    }
    ctx.tau = select_threshold_youden(scores, val_labels);
  }
  if (cfg.cross_model) {
    ClassifierOptions alt_opt = cfg.clf;
    alt_opt.seed = mix_seed(cfg.seed, 31 + static_cast<unsigned long>(fold));
    ctx.f_alt = train_classifier(ctx.train_rows, train_labels, ctx.domain, alt_opt);
  }

  std::vector<DiscreteInstance> pos_rows, neg_rows;
  for (size_t i = 0; i < ctx.train_rows.size(); ++i)
    (train_labels[i] == 1 ? pos_rows : neg_rows).push_back(ctx.train_rows[i]);
  require(!pos_rows.empty() && !neg_rows.empty(), "run_experiment: fold lacks a class");

  Rng pc_rng(mix_seed(cfg.seed, 23 + static_cast<unsigned long>(fold)));
  ctx.p_plus = learn_structure(pos_rows, cards, cfg.pc, pc_rng);
  ctx.p_minus = learn_structure(neg_rows, cards, cfg.pc, pc_rng);

  Rng pool_rng(mix_seed(cfg.seed, 29 + static_cast<unsigned long>(fold)));
  ctx.pool = build_pool(ctx.p_plus, ctx.f, ctx.tau, ctx.domain, cfg.pool.size,
                        static_cast<long>(cfg.pool.size) * cfg.pool.max_draw_factor, pool_rng,
                        &ctx.pool_stats);

  std::vector<DiscreteInstance> test_rows = ctx.disc.transform(test);
  for (const DiscreteInstance& x : test_rows) {
    if (static_cast<int>(ctx.denied.size()) >= cfg.max_denied) break;
    if (classifier_score(ctx.f, x, ctx.domain) < ctx.tau) ctx.denied.push_back(x);
  }
  ctx.setup_seconds = seconds_since(t0);
  return ctx;
}

FoldResult run_fold(const ExperimentConfig& cfg, const LossWeights& weights, FoldContext& ctx,
                    int fold) {
  FoldResult res;
  res.fold = fold;
  res.tau = ctx.tau;
  res.diag = ctx.diag;
  res.setup_seconds = ctx.setup_seconds;
  res.denied = static_cast<long>(ctx.denied.size());
  if (ctx.denied.empty()) {
    res.skipped = true;
    return res;
  }

  auto t0 = std::chrono::steady_clock::now();
  Rng gen_rng(mix_seed(cfg.seed, 41 + static_cast<unsigned long>(fold)));
  GeneratorModels g =
      GeneratorModels::make(ctx.cs, ctx.domain, gen_rng, cfg.gen.hidden, cfg.gen.k_neighbors);
  train_generator(g, ctx.p_plus, ctx.p_minus, ctx.f, ctx.tau, ctx.cs, ctx.domain, ctx.pool,
                  weights, cfg.gen.train, gen_rng);
  res.gen_train_seconds = seconds_since(t0);

  RefineConfig rcfg;
  rcfg.tau = ctx.tau;
  rcfg.delta_max = cfg.delta_max;
  for (const DiscreteInstance& x : ctx.denied) {
    RecourseRecord rec;
    rec.factual = x;
    rec.y_factual = classifier_score(ctx.f, x, ctx.domain);

    auto g0 = std::chrono::steady_clock::now();
    GeneratorContext gctx = build_generator_context(x, ctx.p_plus, g, ctx.pool, ctx.cs, ctx.domain);
    SoftRecourse sr = generate_soft(g, gctx, ctx.cs, nullptr, nullptr);
    rec.pre_ls = decode(sr, ctx.cs);
    rec.gen_seconds = seconds_since(g0);
    rec.y_pre = classifier_score(ctx.f, rec.pre_ls, ctx.domain);
    rec.nll_pre = -ctx.p_plus.log_likelihood(rec.pre_ls);

    if (cfg.local_search) {
      auto r0 = std::chrono::steady_clock::now();
      rec.post_ls = refine(rec.pre_ls, x, ctx.cs, ctx.f, ctx.domain, &ctx.p_plus, rcfg);
      rec.refine_seconds = seconds_since(r0);
    } else {
      rec.post_ls = rec.pre_ls;
    }
    rec.y_post = classifier_score(ctx.f, rec.post_ls, ctx.domain);
    rec.nll_post = -ctx.p_plus.log_likelihood(rec.post_ls);
    res.records.push_back(std::move(rec));
  }

  res.pre = evaluate_fold(res.records, ctx.cs, ctx.mad, ctx.ordered, ctx.tau, false);
  res.post = evaluate_fold(res.records, ctx.cs, ctx.mad, ctx.ordered, ctx.tau, true);
  if (cfg.cross_model) {
    res.cross_yhat_pre = cross_model_yhat(res.records, ctx.f_alt, ctx.domain, false);
    res.cross_yhat_post = cross_model_yhat(res.records, ctx.f_alt, ctx.domain, true);
  }
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Table table = read_csv(cfg.dataset_csv);
  Schema schema = Schema::load(cfg.schema_json);
  FoldPlan plan = FoldPlan::make(static_cast<int>(table.nrows()), cfg.folds, cfg.seed);

  ExperimentResult res;
  std::vector<FoldMetrics> pre, post;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    FoldContext ctx = build_fold_context(cfg, table, schema, plan, fold);
    FoldResult fr = run_fold(cfg, cfg.weights, ctx, fold);
    if (!fr.skipped) {
      pre.push_back(fr.pre);
      post.push_back(fr.post);
    }
    res.folds.push_back(std::move(fr));
  }
  require(!pre.empty(), "run_experiment: every fold was skipped (no denied factuals)");
  res.pre = aggregate_folds(pre);
  res.post = aggregate_folds(post);
  return res;
}

std::string report_json(const ExperimentConfig& cfg, const ExperimentResult& res) {
  json folds = json::array();
  for (const FoldResult& fr : res.folds) {
    json jf{{"fold", fr.fold}, {"tau", fr.tau}, {"denied", fr.denied}, {"skipped", fr.skipped}};
    jf["diagnostics"] = {{"coverage", fr.diag.coverage},
                         {"fidelity", fr.diag.fidelity},
                         {"rows", fr.diag.rows}};
    if (!fr.skipped) {
      jf["pre"] = fold_metrics_json(fr.pre);
      jf["post"] = fold_metrics_json(fr.post);
      if (cfg.cross_model)
        jf["cross_model"] = {{"pre", fr.cross_yhat_pre}, {"post", fr.cross_yhat_post}};
    }
    jf["timing"] = {{"setup_seconds", fr.setup_seconds},
                    {"gen_train_seconds", fr.gen_train_seconds},
                    {"median_seconds_pre", fr.skipped ? 0.0 : fr.pre.median_seconds},
                    {"median_seconds_post", fr.skipped ? 0.0 : fr.post.median_seconds}};
    folds.push_back(std::move(jf));
  }
  json j{{"config", json::parse(cfg.to_json_text())},
         {"folds", std::move(folds)},
         {"aggregate", json{{"pre", aggregate_json(res.pre)}, {"post", aggregate_json(res.post)}}},
         {"timing", json{{"median_seconds_pre", mean_std_json(res.pre.median_seconds)},
                         {"median_seconds_post", mean_std_json(res.post.median_seconds)}}}};
  return j.dump(2);
}

std::string records_csv(const ExperimentResult& res) {
  std::ostringstream out;
  out << "fold,record,y_factual,y_pre,y_post,nll_pre,nll_post,gen_seconds,refine_seconds,"
         "factual,pre_ls,post_ls\n";
  auto codes = [](const DiscreteInstance& x) {
    std::string s;
    for (size_t i = 0; i < x.size(); ++i) {
      if (i) s += ';';
      s += std::to_string(x[i]);
    }
    return s;
  };
  for (const FoldResult& fr : res.folds) {
    for (size_t i = 0; i < fr.records.size(); ++i) {
      const RecourseRecord& r = fr.records[i];
      out << fr.fold << ',' << i << ',' << r.y_factual << ',' << r.y_pre << ',' << r.y_post << ','
          << r.nll_pre << ',' << r.nll_post << ',' << r.gen_seconds << ',' << r.refine_seconds
          << ',' << codes(r.factual) << ',' << codes(r.pre_ls) << ',' << codes(r.post_ls) << "\n";
    }
  }
  return out.str();
}

void write_artifacts(const ExperimentConfig& cfg, const ExperimentResult& res) {
  require(!cfg.out_dir.empty(), "write_artifacts: out_dir not set");
  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir + "/report.json");
    require(out.good(), "write_artifacts: cannot write report.json");
    out << report_json(cfg, res) << "\n";
  }
  {
    std::ofstream out(cfg.out_dir + "/records.csv");
    require(out.good(), "write_artifacts: cannot write records.csv");
    out << records_csv(res);
  }
}

std::vector<AblationVariant> ablation_matrix(const LossWeights& base) {
  auto with = [&](bool val, bool plus, bool minus) {
    LossWeights w = base;
    w.enable_val = val;
    w.enable_plus = plus;
    w.enable_minus = minus;
    return w;
  };
  return {{"full", with(true, true, true)},
          {"val_pplus", with(true, true, false)},
          {"val_only", with(true, false, false)},
          {"plaus_only", with(false, true, true)},
          {"none", with(false, false, false)}};
}

std::vector<AblationEntry> run_ablation(const ExperimentConfig& cfg,
                                        const std::vector<AblationVariant>& variants) {
  require(!variants.empty(), "run_ablation: no variants");
  Table table = read_csv(cfg.dataset_csv);
  Schema schema = Schema::load(cfg.schema_json);
  FoldPlan plan = FoldPlan::make(static_cast<int>(table.nrows()), cfg.folds, cfg.seed);

  std::vector<std::vector<FoldMetrics>> pre(variants.size()), post(variants.size());
  for (int fold = 0; fold < cfg.folds; ++fold) {
    FoldContext ctx = build_fold_context(cfg, table, schema, plan, fold);
    for (size_t v = 0; v < variants.size(); ++v) {
      FoldResult fr = run_fold(cfg, variants[v].weights, ctx, fold);
      if (!fr.skipped) {
        pre[v].push_back(fr.pre);
        post[v].push_back(fr.post);
      }
    }
  }
  std::vector<AblationEntry> entries;
  for (size_t v = 0; v < variants.size(); ++v) {
    require(!pre[v].empty(), "run_ablation: every fold was skipped");
    entries.push_back({variants[v].name, aggregate_folds(pre[v]), aggregate_folds(post[v])});
  }
  return entries;
}

std::string ablation_json(const ExperimentConfig& cfg, const std::vector<AblationEntry>& entries) {
  json arr = json::array();
  for (const AblationEntry& e : entries)
    arr.push_back(json{{"name", e.name},
                       {"pre", aggregate_json(e.pre)},
                       {"post", aggregate_json(e.post)}});
  json j{{"config", json::parse(cfg.to_json_text())}, {"variants", std::move(arr)}};
  return j.dump(2);
}

}  // namespace par
