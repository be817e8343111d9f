/**
 * @file pipeline.h
 * @brief Run configuration and the end-to-end commands behind the CLI
 *
 * Every command is deterministic given its input files, configuration and
 * seed when training runs with a single worker.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tai2vec/corpus.h"
#include "tai2vec/recsys.h"
#include "tai2vec/temporal.h"
#include "tai2vec/trainer.h"
#include "tai2vec/weighting.h"

namespace tai2vec::pipeline {

struct DataConfig {
  std::string path;  // raw interaction log
  corpus::ColumnMapping mapping;
  std::optional<corpus::RatingRange> rating_range;
  int min_interactions = 5;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
};

struct EvalConfig {
  std::vector<int> cutoffs;  // default 1..20
  int negative_ratio = 1;
  int selection_cutoff = 10;  // grid search ranks points by NDCG@selection_cutoff
};

struct RunConfig {
  DataConfig data;
  temporal::TemporalConfig temporal;
  weighting::WeightConfig weighting;
  trainer::TrainConfig train;
  EvalConfig eval;
  std::string output_dir = "out";
  uint64_t seed = 42;

  RunConfig();
  /// Also copies shared fields (seed, lambda) into the component configs.
  void finalize();
  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& json);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config_file(const std::string& path);

/// 16 hex digits of FNV-1a over the canonical config dump.
std::string config_hash(const RunConfig& config);

// ---------------------------------------------------------------------------
// In-memory building blocks

struct PreprocessResult {
  corpus::SplitResult split;  // cold-start pruned
  size_t skipped_rows = 0;
};

PreprocessResult preprocess(const corpus::Dataset& raw, const RunConfig& config);

trainer::TrainResult train_model(const corpus::Dataset& data, const RunConfig& config);

/// Metrics on `target` using `history` as each user's consumed items.
recsys::MetricsReport evaluate_model(const trainer::EmbeddingModel& model,
                                     const corpus::Dataset& history,
                                     const corpus::Dataset& target, const RunConfig& config);

nlohmann::json report_to_json(const recsys::MetricsReport& report);

struct GridSpec {
  std::vector<std::string> modes;
  std::vector<int> windows;
  std::vector<double> neg_exponents;
  std::vector<double> subsample_ts;
  std::vector<double> learning_rates;
  std::vector<int> epochs;
  std::vector<double> lambdas;
  std::vector<double> alphas;
  std::vector<double> w_mins;

  /// Missing lists fall back to the single value in `base`.
  static GridSpec from_json(const nlohmann::json& json);

  /// Cartesian product over `base`; values that do not affect a point's mode
  /// are held at the base value and duplicates removed.
  std::vector<RunConfig> expand(const RunConfig& base) const;
};

struct GridPoint {
  RunConfig config;
  std::optional<recsys::MetricsReport> metrics;
  std::string error;  // non-empty when the point failed
};

struct GridResult {
  std::vector<GridPoint> points;
  std::optional<size_t> best;

  double selection_score(size_t index) const;
};

/// Trains every point on split.train and scores it on split.validation.
/// `jobs` points run concurrently; results keep grid order.
GridResult grid_search(const corpus::SplitResult& split, const RunConfig& base,
                       const GridSpec& grid, int jobs = 1);

void write_grid_table(std::ostream& out, const GridResult& result, int selection_cutoff);

// ---------------------------------------------------------------------------
// Commands (file-based). Each returns the primary artifact path.

std::string split_path(const RunConfig& config, const std::string& name);

/// Reads a canonical split file written by cmd_preprocess.
corpus::Dataset read_split(const RunConfig& config, const std::string& name);

std::string cmd_preprocess(const RunConfig& config);

enum class TrainOn { kTrain, kTrainAndValidation };

std::string cmd_train(const RunConfig& config, TrainOn on = TrainOn::kTrainAndValidation,
                      const std::string& model_path = {});

enum class EvaluateOn { kValidation, kTest };

std::string cmd_evaluate(const RunConfig& config, const std::string& model_path,
                         EvaluateOn on = EvaluateOn::kTest, const std::string& report_path = {});

struct RecommendRequest {
  std::string model_path;
  std::string user_id;       // history from train + validation
  std::string history_path;  // or one item id per line
  size_t k = 10;
};

/// Writes (user_id, rank, item_id, score) rows to `out`; warnings go to `warn`.
recsys::RankedList cmd_recommend(const RunConfig& config, const RecommendRequest& request,
                                 std::ostream& out, std::ostream& warn);

std::string cmd_grid_search(const RunConfig& config, const GridSpec& grid, int jobs);

/// Per-user temporal profile table plus dataset aggregates.
std::string cmd_stats(const RunConfig& config, const std::string& split_name = "train");

struct CurveRequest {
  std::string user_id;
  std::vector<size_t> anchors;  // empty: first, middle, last
};

std::string cmd_export_curves(const RunConfig& config, const CurveRequest& request);

/// Stats and curves on an in-memory dataset; used by the commands above.
void write_stats(std::ostream& table, std::ostream& summary, const corpus::Dataset& data,
                 const RunConfig& config);
void write_curves(std::ostream& out, const corpus::Dataset& data, const RunConfig& config,
                  const CurveRequest& request);

}  // namespace tai2vec::pipeline
