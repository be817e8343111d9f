/**
 * @file tai2vec_main.cc
 * @brief Command-line front end
 */

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tai2vec/error.h"
#include "tai2vec/pipeline.h"

namespace {

using tai2vec::Error;
using tai2vec::ErrorCategory;
using namespace tai2vec::pipeline;

struct GlobalOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::string output_dir;
};

RunConfig resolve_config(const GlobalOptions& options) {
  RunConfig config = options.config_path.empty() ? RunConfig{} : load_config_file(options.config_path);
  if (options.seed) config.seed = *options.seed;
  if (options.workers) config.train.workers = *options.workers;
  if (!options.output_dir.empty()) config.output_dir = options.output_dir;
  config.finalize();
  config.validate();
  return config;
}

int fail(ErrorCategory category, const std::string& message) {
  std::string line = message;
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error: " << tai2vec::category_name(category) << ": " << line << '\n';
  return tai2vec::exit_code(category);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-aware item embeddings for next-item recommendation"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON configuration file");
  app.add_option("--seed", global.seed, "Override the configured seed");
  app.add_option("--workers", global.workers, "Training threads (1 is deterministic)");
  app.add_option("--output-dir", global.output_dir, "Directory for all artifacts");

  auto* preprocess = app.add_subcommand("preprocess", "Clean and split the raw interaction log");
  std::string input_path;
  preprocess->add_option("--input", input_path, "Raw interaction file (overrides data.path)");

  auto* train = app.add_subcommand("train", "Train embeddings on the preprocessed splits");
  bool train_only = false;
  std::string model_out;
  train->add_flag("--train-only", train_only, "Use the train split only (default: train+validation)");
  train->add_option("--model", model_out, "Model output path");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on the test or validation split");
  std::string eval_model;
  std::string eval_split = "test";
  std::string report_out;
  std::vector<int> cutoffs;
  evaluate->add_option("--model", eval_model, "Model file")->required();
  evaluate->add_option("--split", eval_split, "test or validation")
      ->check(CLI::IsMember({"test", "validation"}));
  evaluate->add_option("--report", report_out, "Report output path");
  evaluate->add_option("--cutoffs", cutoffs, "Ranking cutoffs");

  auto* recommend = app.add_subcommand("recommend", "Top-K items for a user or a history file");
  RecommendRequest request;
  recommend->add_option("--model", request.model_path, "Model file")->required();
  auto* user_opt = recommend->add_option("--user", request.user_id, "User id");
  recommend->add_option("--history", request.history_path, "File with one item id per line")
      ->excludes(user_opt);
  recommend->add_option("-k,--top-k", request.k, "Number of items");

  auto* grid = app.add_subcommand("grid-search", "Train and validate every grid point");
  std::string grid_path;
  int jobs = 1;
  grid->add_option("--grid", grid_path, "JSON grid specification")->required();
  grid->add_option("--jobs", jobs, "Grid points trained concurrently");

  auto* stats = app.add_subcommand("stats", "Per-user temporal profile table");
  std::string stats_split = "train";
  stats->add_option("--split", stats_split, "train, validation, test or train+validation")
      ->check(CLI::IsMember({"train", "validation", "test", "train+validation"}));

  auto* curves = app.add_subcommand("export-curves", "Decay weights around anchor events");
  CurveRequest curve_request;
  curves->add_option("--user", curve_request.user_id, "User id")->required();
  curves->add_option("--anchors", curve_request.anchors, "Event indices (default first, middle, last)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCategory::kUsage, e.what());
  }

  try {
    RunConfig config = resolve_config(global);
    std::string artifact;
    if (*preprocess) {
      if (!input_path.empty()) config.data.path = input_path;
      artifact = cmd_preprocess(config);
    } else if (*train) {
      artifact = cmd_train(config, train_only ? TrainOn::kTrain : TrainOn::kTrainAndValidation, model_out);
    } else if (*evaluate) {
      if (!cutoffs.empty()) config.eval.cutoffs = cutoffs;
      config.validate();
      artifact = cmd_evaluate(config, eval_model,
                              eval_split == "test" ? EvaluateOn::kTest : EvaluateOn::kValidation,
                              report_out);
    } else if (*recommend) {
      cmd_recommend(config, request, std::cout, std::cerr);
      return 0;
    } else if (*grid) {
      std::ifstream in(grid_path);
      if (!in) throw Error(ErrorCategory::kIo, "cannot open grid " + grid_path);
      nlohmann::json spec;
      try {
        in >> spec;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::kUsage, std::string("grid is not valid JSON: ") + e.what());
      }
      artifact = cmd_grid_search(config, GridSpec::from_json(spec), jobs);
    } else if (*stats) {
      artifact = cmd_stats(config, stats_split);
    } else if (*curves) {
      artifact = cmd_export_curves(config, curve_request);
    }
    std::cout << artifact << '\n';
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCategory::kIo, e.what());
  }
  return 0;
}
