#pragma once

#include <optional>
#include <string>
#include <vector>

#include "par/circuit.hpp"
#include "par/classifier.hpp"
#include "par/constraints.hpp"
#include "par/csv.hpp"
#include "par/discretizer.hpp"
#include "par/learnspn.hpp"
#include "par/local_search.hpp"
#include "par/metrics.hpp"
#include "par/recourse.hpp"
#include "par/schema.hpp"

namespace par {

enum class TauPolicy { fixed, youden };

struct PoolOptions {
  int size = 512;
  long max_draw_factor = 200;  // max draws = size * factor
};

struct GeneratorOptions {
  TrainGenOptions train;
  int hidden = 128;
  int k_neighbors = 5;
};

struct ExperimentConfig {
  std::string dataset_csv;
  std::string schema_json;
  std::string out_dir;
  unsigned long seed = 7;
  int folds = 5;
  int max_denied = 500;
  TauPolicy tau_policy = TauPolicy::fixed;
  double fixed_tau = 0.5;
  DiscretizerOptions disc;
  ClassifierOptions clf;
  LearnSpnOptions pc;
  PoolOptions pool;
  GeneratorOptions gen;
  LossWeights weights;
  bool local_search = true;
  std::optional<double> delta_max;
  bool cross_model = false;

  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct FoldPlan {
  std::vector<std::vector<int>> train_idx;
  std::vector<std::vector<int>> test_idx;
  // Seeded shuffle split into k disjoint test sets covering 0..n-1.
  static FoldPlan make(int n, int k, unsigned long seed);
};

// Everything trained before the generator; shared across ablation variants.
struct FoldContext {
  Discretizer disc;
  Domain domain;
  ConstraintSet cs;
  MlpModel f;
  MlpModel f_alt;
  double tau = 0.5;
  Circuit p_plus;
  Circuit p_minus;
  NeighborhoodPool pool;
  std::vector<DiscreteInstance> train_rows;
  std::vector<DiscreteInstance> denied;
  std::vector<double> mad;
  std::vector<bool> ordered;
  BinDiagnostics diag;
  PoolBuildStats pool_stats;
  double setup_seconds = 0.0;
};

FoldContext build_fold_context(const ExperimentConfig& cfg, const Table& table,
                               const Schema& schema, const FoldPlan& plan, int fold);

struct FoldResult {
  int fold = 0;
  double tau = 0.5;
  long denied = 0;
  bool skipped = false;
  FoldMetrics pre;
  FoldMetrics post;
  std::vector<RecourseRecord> records;
  BinDiagnostics diag;
  double cross_yhat_pre = 0.0;
  double cross_yhat_post = 0.0;
  double setup_seconds = 0.0;
  double gen_train_seconds = 0.0;
};

FoldResult run_fold(const ExperimentConfig& cfg, const LossWeights& weights, FoldContext& ctx,
                    int fold);

struct ExperimentResult {
  std::vector<FoldResult> folds;
  AggregateMetrics pre;
  AggregateMetrics post;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// report.json (timings grouped under "timing" keys so seeded runs compare
// bitwise after stripping them) and records.csv under cfg.out_dir.
std::string report_json(const ExperimentConfig& cfg, const ExperimentResult& res);
std::string records_csv(const ExperimentResult& res);
void write_artifacts(const ExperimentConfig& cfg, const ExperimentResult& res);

struct AblationVariant {
  std::string name;
  LossWeights weights;
};
// Toggle matrix over the validity loss and the two plausibility circuits.
std::vector<AblationVariant> ablation_matrix(const LossWeights& base);

struct AblationEntry {
  std::string name;
  AggregateMetrics pre;
  AggregateMetrics post;
};
std::vector<AblationEntry> run_ablation(const ExperimentConfig& cfg,
                                        const std::vector<AblationVariant>& variants);
std::string ablation_json(const ExperimentConfig& cfg, const std::vector<AblationEntry>& entries);

}  // namespace par
