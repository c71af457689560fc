#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "par/experiment.hpp"

using nlohmann::json;

namespace {

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  par::require(out.good(), "cannot write " + path);
  out << text;
}

double load_tau(const std::string& path) {
  std::ifstream in(path);
  par::require(in.good(), "cannot open " + path);
  double tau;
  in >> tau;
  par::require(!in.fail(), "bad threshold file " + path);
  return tau;
}

void print_metrics_block(const char* title, const json& m) {
  auto ms = [&](const char* key) {
    if (!m.contains(key)) return std::string("   --");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%8.2f +- %.2f", m[key]["mean"].get<double>(),
                  m[key]["std"].get<double>());
    return std::string(buf);
  };
  std::printf("%-10s validity %s  action %s  causal %s\n", title, ms("validity_pct").c_str(),
              ms("actionability_pct").c_str(), ms("causality_pct").c_str());
  std::printf("%-10s nll      %s  simil  %s  sparse %s\n", "", ms("nll").c_str(),
              ms("similarity").c_str(), ms("sparsity").c_str());
}

void print_report(const json& rep) {
  std::printf("folds: %zu\n", rep["folds"].size());
  for (const json& f : rep["folds"]) {
    std::printf("  fold %d: tau=%.3f denied=%ld coverage=%.4f fidelity=%.4f%s\n",
                f["fold"].get<int>(), f["tau"].get<double>(), f["denied"].get<long>(),
                f["diagnostics"]["coverage"].get<double>(),
                f["diagnostics"]["fidelity"].get<double>(),
                f["skipped"].get<bool>() ? " (skipped)" : "");
  }
  print_metrics_block("pre-LS", rep["aggregate"]["pre"]);
  print_metrics_block("post-LS", rep["aggregate"]["post"]);
  std::printf("median seconds/recourse: pre %.4f  post %.4f\n",
              rep["timing"]["median_seconds_pre"]["mean"].get<double>(),
              rep["timing"]["median_seconds_post"]["mean"].get<double>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plausible recourse benchmark over class-conditional circuits"};
  app.require_subcommand(1);

  std::string data_path, schema_path, out_dir, config_path, report_path;
  std::string disc_path, pplus_path, pminus_path, clf_path, tau_path, gen_path, pool_path;
  std::string which_class = "pos", ls_flag = "on";
  par::DiscretizerOptions disc_opt;
  par::ClassifierOptions clf_opt;
  par::LearnSpnOptions pc_opt;
  bool youden = false;
  unsigned long seed = 7;

  auto* prepare = app.add_subcommand("prepare", "fit the discretizer and report bin diagnostics");
  prepare->add_option("--data", data_path)->required();
  prepare->add_option("--schema", schema_path)->required();
  prepare->add_option("--out-dir", out_dir)->required();
  prepare->add_option("--bins", disc_opt.bins_per_numeric);
  prepare->add_option("--discrete-threshold", disc_opt.discrete_cardinality_threshold);

  auto* train_pc = app.add_subcommand("train-pc", "learn a class-conditional circuit");
  train_pc->add_option("--data", data_path)->required();
  train_pc->add_option("--disc", disc_path)->required();
  train_pc->add_option("--class", which_class)->check(CLI::IsMember({"pos", "neg"}));
  train_pc->add_option("--out", out_dir)->required();
  train_pc->add_option("--min-rows", pc_opt.min_rows);
  train_pc->add_option("--min-cols", pc_opt.min_cols);
  train_pc->add_option("--leaf-alpha", pc_opt.leaf_alpha);
  train_pc->add_option("--seed", seed);

  auto* train_clf = app.add_subcommand("train-clf", "train the scoring classifier");
  train_clf->add_option("--data", data_path)->required();
  train_clf->add_option("--disc", disc_path)->required();
  train_clf->add_option("--out", out_dir)->required();
  train_clf->add_flag("--youden", youden, "pick tau by Youden's J on a held-out fifth");
  train_clf->add_option("--epochs", clf_opt.epochs);
  train_clf->add_option("--batch", clf_opt.batch);
  train_clf->add_option("--lr", clf_opt.lr);
  train_clf->add_option("--seed", seed);

  auto* train_gen = app.add_subcommand("train-gen", "train the recourse generator");
  std::string gen_config_path;
  train_gen->add_option("--config", gen_config_path)->required();
  train_gen->add_option("--data", data_path)->required();
  train_gen->add_option("--disc", disc_path)->required();
  train_gen->add_option("--pplus", pplus_path)->required();
  train_gen->add_option("--pminus", pminus_path)->required();
  train_gen->add_option("--clf", clf_path)->required();
  train_gen->add_option("--tau", tau_path)->required();
  train_gen->add_option("--out", out_dir)->required();

  auto* generate = app.add_subcommand("generate", "produce recourses for denied rows");
  generate->add_option("--data", data_path)->required();
  generate->add_option("--disc", disc_path)->required();
  generate->add_option("--pplus", pplus_path)->required();
  generate->add_option("--clf", clf_path)->required();
  generate->add_option("--tau", tau_path)->required();
  generate->add_option("--gen", gen_path)->required();
  generate->add_option("--pool", pool_path)->required();
  double gen_budget = 4.0;
  generate->add_option("--budget", gen_budget, "training-time expected-change budget");
  generate->add_option("--local-search", ls_flag)->check(CLI::IsMember({"on", "off"}));
  generate->add_option("--out", out_dir)->required();

  auto* evaluate = app.add_subcommand("evaluate", "run the fold benchmark from a config file");
  evaluate->add_option("--config", config_path)->required();

  auto* ablate = app.add_subcommand("ablate", "run the loss-term toggle matrix");
  ablate->add_option("--config", config_path)->required();

  auto* report = app.add_subcommand("report", "print a report.json as a table");
  report->add_option("--report", report_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      par::Table t = par::read_csv(data_path);
      par::Schema schema = par::Schema::load(schema_path);
      par::Discretizer disc = par::Discretizer::fit(t, schema, disc_opt);
      std::filesystem::create_directories(out_dir);
      disc.save(out_dir + "/discretizer.json");
      par::BinDiagnostics diag = disc.diagnostics(t);
      std::printf("features: %zu  rows: %ld\n", disc.features().size(), diag.rows);
      std::printf("coverage: %.6f  fidelity: %.6f\n", diag.coverage, diag.fidelity);
    } else if (train_pc->parsed()) {
      par::Table t = par::read_csv(data_path);
      par::Discretizer disc = par::Discretizer::load(disc_path);
      auto rows = disc.transform(t);
      auto labels = disc.labels(t);
      std::vector<par::DiscreteInstance> subset;
      int want = which_class == "pos" ? 1 : 0;
      for (size_t i = 0; i < rows.size(); ++i)
        if (labels[i] == want) subset.push_back(rows[i]);
      par::require(!subset.empty(), "no rows for the requested class");
      std::vector<int> cards;
      for (const auto& fd : disc.features()) cards.push_back(fd.cardinality());
      par::Rng rng(seed);
      par::Circuit pc = par::learn_structure(subset, cards, pc_opt, rng);
      pc.save(out_dir);
      double ll = 0.0;
      for (const auto& r : subset) ll += pc.log_likelihood(r);
      std::printf("rows: %zu  nodes: %zu  mean train LL: %.4f\n", subset.size(),
                  pc.nodes().size(), ll / static_cast<double>(subset.size()));
    } else if (train_clf->parsed()) {
      par::Table t = par::read_csv(data_path);
      par::Discretizer disc = par::Discretizer::load(disc_path);
      auto rows = disc.transform(t);
      auto labels = disc.labels(t);
      clf_opt.seed = seed;
      double tau = 0.5;
      par::MlpModel f;
      if (youden) {
        par::Rng rng(seed);
        std::vector<int> order(rows.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::shuffle(order.begin(), order.end(), rng);
        size_t cut = order.size() - order.size() / 5;
        std::vector<par::DiscreteInstance> fit_rows;
        std::vector<int> fit_labels;
        for (size_t i = 0; i < cut; ++i) {
          fit_rows.push_back(rows[order[i]]);
          fit_labels.push_back(labels[order[i]]);
        }
        f = par::train_classifier(fit_rows, fit_labels, disc.domain(), clf_opt);
        std::vector<double> scores;
        std::vector<int> val_labels;
        for (size_t i = cut; i < order.size(); ++i) {
          scores.push_back(par::classifier_score(f, rows[order[i]], disc.domain()));
          val_labels.push_back(labels[order[i]]);
        }
        tau = par::select_threshold_youden(scores, val_labels);
      } else {
        f = par::train_classifier(rows, labels, disc.domain(), clf_opt);
      }
      std::filesystem::create_directories(out_dir);
      save_text(out_dir + "/classifier.txt", par::mlp_to_text(f));
      save_text(out_dir + "/tau.txt", std::to_string(tau) + "\n");
      long correct = 0;
      for (size_t i = 0; i < rows.size(); ++i)
        correct += (par::classifier_score(f, rows[i], disc.domain()) >= tau ? 1 : 0) == labels[i];
      std::printf("tau: %.4f  train accuracy: %.4f\n", tau,
                  static_cast<double>(correct) / static_cast<double>(rows.size()));
    } else if (train_gen->parsed()) {
      par::ExperimentConfig cfg = par::ExperimentConfig::load(gen_config_path);
      par::Table t = par::read_csv(data_path);
      par::Discretizer disc = par::Discretizer::load(disc_path);
      par::Circuit p_plus = par::Circuit::load(pplus_path);
      par::Circuit p_minus = par::Circuit::load(pminus_path);
      std::ifstream cin_(clf_path);
      par::require(cin_.good(), "cannot open " + clf_path);
      par::MlpModel f = par::mlp_read(cin_);
      double tau = load_tau(tau_path);
      par::ConstraintSet cs = par::build_constraints(disc.schema(), disc, cfg.weights.budget);
      par::Rng rng(cfg.seed);
      par::PoolBuildStats stats;
      par::NeighborhoodPool pool =
          par::build_pool(p_plus, f, tau, disc.domain(), cfg.pool.size,
                          static_cast<long>(cfg.pool.size) * cfg.pool.max_draw_factor, rng, &stats);
      par::GeneratorModels g =
          par::GeneratorModels::make(cs, disc.domain(), rng, cfg.gen.hidden, cfg.gen.k_neighbors);
      par::GenTrainLog log = par::train_generator(g, p_plus, p_minus, f, tau, cs, disc.domain(),
                                                  pool, cfg.weights, cfg.gen.train, rng);
      std::filesystem::create_directories(out_dir);
      par::save_generator(g, out_dir + "/generator.txt");
      par::save_pool(pool, out_dir + "/pool.txt");
      std::printf("pool acceptance: %.3f (%ld/%ld)\n", stats.acceptance_rate, stats.accepted,
                  stats.draws);
      if (!log.per_epoch.empty())
        std::printf("first/last epoch loss: %.4f -> %.4f\n", log.per_epoch.front().total,
                    log.per_epoch.back().total);
    } else if (generate->parsed()) {
      par::Table t = par::read_csv(data_path);
      par::Discretizer disc = par::Discretizer::load(disc_path);
      par::Circuit p_plus = par::Circuit::load(pplus_path);
      std::ifstream cin_(clf_path);
      par::require(cin_.good(), "cannot open " + clf_path);
      par::MlpModel f = par::mlp_read(cin_);
      double tau = load_tau(tau_path);
      par::GeneratorModels g = par::load_generator(gen_path);
      par::NeighborhoodPool pool = par::load_pool(pool_path);
      par::ConstraintSet cs = par::build_constraints(disc.schema(), disc, gen_budget);
      par::RefineConfig rcfg;
      rcfg.tau = tau;
      auto rows = disc.transform(t);
      par::Table out;
      out.columns = {"row", "y_factual", "y_recourse", "nll_recourse"};
      for (const auto& fd : disc.features()) out.columns.push_back(fd.name);
      long flipped = 0, denied = 0;
      for (size_t i = 0; i < rows.size(); ++i) {
        double y0 = par::classifier_score(f, rows[i], disc.domain());
        if (y0 >= tau) continue;
        ++denied;
        par::GeneratorContext ctx =
            par::build_generator_context(rows[i], p_plus, g, pool, cs, disc.domain());
        par::SoftRecourse sr = par::generate_soft(g, ctx, cs, nullptr, nullptr);
        par::DiscreteInstance c = par::decode(sr, cs);
        if (ls_flag == "on")
          c = par::refine(c, rows[i], cs, f, disc.domain(), &p_plus, rcfg);
        double y1 = par::classifier_score(f, c, disc.domain());
        flipped += y1 >= tau;
        std::vector<std::string> cells = {std::to_string(i), std::to_string(y0),
                                          std::to_string(y1),
                                          std::to_string(-p_plus.log_likelihood(c))};
        for (size_t j = 0; j < c.size(); ++j)
          cells.push_back(disc.display_value(static_cast<int>(j), c[j]));
        out.rows.push_back(std::move(cells));
      }
      par::write_csv(out, out_dir);
      std::printf("denied: %ld  flipped: %ld (%.1f%%)\n", denied, flipped,
                  denied ? 100.0 * flipped / denied : 0.0);
    } else if (evaluate->parsed()) {
      par::ExperimentConfig cfg = par::ExperimentConfig::load(config_path);
      par::ExperimentResult res = par::run_experiment(cfg);
      if (!cfg.out_dir.empty()) par::write_artifacts(cfg, res);
      print_report(json::parse(par::report_json(cfg, res)));
    } else if (ablate->parsed()) {
      par::ExperimentConfig cfg = par::ExperimentConfig::load(config_path);
      auto variants = par::ablation_matrix(cfg.weights);
      auto entries = par::run_ablation(cfg, variants);
      if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        save_text(cfg.out_dir + "/ablation.json", par::ablation_json(cfg, entries) + "\n");
      }
      for (const auto& e : entries) {
        json j = json::parse(par::ablation_json(cfg, {e}));
        print_metrics_block(e.name.c_str(), j["variants"][0]["pre"]);
      }
    } else if (report->parsed()) {
      std::ifstream in(report_path);
      par::require(in.good(), "cannot open " + report_path);
      json rep = json::parse(in);
      print_report(rep);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
