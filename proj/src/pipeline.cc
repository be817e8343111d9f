/**
 * @file pipeline.cc
 * @brief Configuration handling and the end-to-end commands
 */

#include "tai2vec/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "tai2vec/error.h"
#include "text_util.h"

namespace tai2vec::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

char parse_delimiter(const std::string& value) {
  if (value == "\\t" || value == "\t" || value == "tab") return '\t';
  if (value.size() == 1) return value[0];
  throw Error(ErrorCategory::kUsage, "delimiter must be a single character");
}

std::string delimiter_string(char delimiter) {
  return delimiter == '\t' ? "\\t" : std::string(1, delimiter);
}

std::string hex64(uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

uint64_t fnv1a(std::string_view bytes) {
  uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCategory::kIo, "cannot create directory " + dir + ": " + ec.message());
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCategory::kIo, "cannot write " + path);
  }
  return out;
}

std::string optional_number(const std::optional<double>& value) {
  return value ? text::format_double(*value) : "NA";
}

const temporal::UserTimeline& find_timeline(const trainer::TrainingCorpus& corpus,
                                            const std::string& user_id, size_t* position) {
  auto it = std::lower_bound(
      corpus.timelines.begin(), corpus.timelines.end(), user_id,
      [](const temporal::UserTimeline& t, const std::string& id) { return t.user_id < id; });
  if (it == corpus.timelines.end() || it->user_id != user_id) {
    throw Error(ErrorCategory::kData, "unknown user '" + user_id + "'");
  }
  *position = static_cast<size_t>(it - corpus.timelines.begin());
  return *it;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig::RunConfig() {
  for (int n = 1; n <= 20; ++n) eval.cutoffs.push_back(n);
}

void RunConfig::finalize() {
  train.seed = seed;
  temporal.lambda = weighting.lambda;
}

void RunConfig::validate() const {
  temporal.validate();
  weighting.validate();
  train.validate();
  if (data.min_interactions < 1) {
    throw Error(ErrorCategory::kUsage, "data.min_interactions must be >= 1");
  }
  if (eval.cutoffs.empty() ||
      std::any_of(eval.cutoffs.begin(), eval.cutoffs.end(), [](int c) { return c < 1; })) {
    throw Error(ErrorCategory::kUsage, "eval.cutoffs must be a non-empty list of values >= 1");
  }
  if (eval.negative_ratio < 0 || eval.selection_cutoff < 1) {
    throw Error(ErrorCategory::kUsage, "eval.negative_ratio >= 0 and selection_cutoff >= 1");
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig config;
  try {
    if (j.contains("data")) {
      const json& d = j["data"];
      auto& m = config.data.mapping;
      config.data.path = d.value("path", config.data.path);
      m.delimiter = parse_delimiter(d.value("delimiter", delimiter_string(m.delimiter)));
      m.has_header = d.value("header", m.has_header);
      if (d.contains("columns")) {
        const json& c = d["columns"];
        m.user_column = c.value("user", m.user_column);
        m.item_column = c.value("item", m.item_column);
        m.timestamp_column = c.value("timestamp", m.timestamp_column);
        m.rating_column = c.value("rating", m.rating_column);
      }
      m.timestamp_scale = d.value("timestamp_scale", m.timestamp_scale);
      if (d.contains("rating_range") && !d["rating_range"].is_null()) {
        const auto range = d["rating_range"].get<std::vector<double>>();
        if (range.size() != 2) {
          throw Error(ErrorCategory::kUsage, "data.rating_range must be [min, max]");
        }
        config.data.rating_range = corpus::RatingRange{range[0], range[1]};
      }
      config.data.min_interactions = d.value("min_interactions", config.data.min_interactions);
      if (d.contains("split")) {
        const auto ratios = d["split"].get<std::vector<double>>();
        if (ratios.size() != 3) {
          throw Error(ErrorCategory::kUsage, "data.split must list three ratios");
        }
        config.data.train_ratio = ratios[0];
        config.data.val_ratio = ratios[1];
        config.data.test_ratio = ratios[2];
      }
    }
    if (j.contains("temporal")) {
      const json& t = j["temporal"];
      config.temporal.t_min = t.value("t_min", config.temporal.t_min);
      config.temporal.epsilon = t.value("epsilon", config.temporal.epsilon);
      config.temporal.clip_factor = t.value("clip_factor", config.temporal.clip_factor);
      config.temporal.clip_cumulative = t.value("clip_cumulative", config.temporal.clip_cumulative);
    }
    if (j.contains("weighting")) {
      const json& w = j["weighting"];
      config.weighting.mode =
          weighting::parse_mode(w.value("mode", std::string(weighting::mode_name(config.weighting.mode))));
      config.weighting.lambda = w.value("lambda", config.weighting.lambda);
      config.weighting.alpha = w.value("alpha", config.weighting.alpha);
      config.weighting.w_min = w.value("w_min", config.weighting.w_min);
      config.weighting.fixed_tau = w.value("fixed_tau", config.weighting.fixed_tau);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      auto& c = config.train;
      c.dim = t.value("dim", c.dim);
      c.window = t.value("window", c.window);
      c.negatives = t.value("negatives", c.negatives);
      c.neg_exponent = t.value("neg_exponent", c.neg_exponent);
      c.subsample_t = t.value("subsample_t", c.subsample_t);
      c.learning_rate = t.value("learning_rate", c.learning_rate);
      c.epochs = t.value("epochs", c.epochs);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.workers = t.value("workers", c.workers);
      c.optimizer =
          trainer::parse_optimizer(t.value("optimizer", std::string(trainer::optimizer_name(c.optimizer))));
    }
    if (j.contains("eval")) {
      const json& e = j["eval"];
      if (e.contains("cutoffs")) config.eval.cutoffs = e["cutoffs"].get<std::vector<int>>();
      config.eval.negative_ratio = e.value("negative_ratio", config.eval.negative_ratio);
      config.eval.selection_cutoff = e.value("selection_cutoff", config.eval.selection_cutoff);
    }
    config.output_dir = j.value("output_dir", config.output_dir);
    config.seed = j.value("seed", config.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kUsage, std::string("bad config: ") + e.what());
  }
  config.finalize();
  return config;
}

json config_to_json(const RunConfig& config) {
  const auto& m = config.data.mapping;
  json data = {
      {"path", config.data.path},
      {"delimiter", delimiter_string(m.delimiter)},
      {"header", m.has_header},
      {"columns",
       {{"user", m.user_column},
        {"item", m.item_column},
        {"timestamp", m.timestamp_column},
        {"rating", m.rating_column}}},
      {"timestamp_scale", m.timestamp_scale},
      {"rating_range", config.data.rating_range
                           ? json::array({config.data.rating_range->min, config.data.rating_range->max})
                           : json(nullptr)},
      {"min_interactions", config.data.min_interactions},
      {"split", {config.data.train_ratio, config.data.val_ratio, config.data.test_ratio}},
  };
  const auto& t = config.train;
  return json{
      {"data", data},
      {"temporal",
       {{"t_min", config.temporal.t_min},
        {"epsilon", config.temporal.epsilon},
        {"clip_factor", config.temporal.clip_factor},
        {"clip_cumulative", config.temporal.clip_cumulative}}},
      {"weighting",
       {{"mode", weighting::mode_name(config.weighting.mode)},
        {"lambda", config.weighting.lambda},
        {"alpha", config.weighting.alpha},
        {"w_min", config.weighting.w_min},
        {"fixed_tau", config.weighting.fixed_tau}}},
      {"train",
       {{"dim", t.dim},
        {"window", t.window},
        {"negatives", t.negatives},
        {"neg_exponent", t.neg_exponent},
        {"subsample_t", t.subsample_t},
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"workers", t.workers},
        {"optimizer", trainer::optimizer_name(t.optimizer)}}},
      {"eval",
       {{"cutoffs", config.eval.cutoffs},
        {"negative_ratio", config.eval.negative_ratio},
        {"selection_cutoff", config.eval.selection_cutoff}}},
      {"output_dir", config.output_dir},
      {"seed", config.seed},
  };
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::kIo, "cannot open config " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kUsage, "config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("output_dir");
  j["train"].erase("workers");
  return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------
// In-memory building blocks

PreprocessResult preprocess(const corpus::Dataset& raw, const RunConfig& config) {
  corpus::Dataset cleaned = corpus::clean(raw, config.data.rating_range, config.data.min_interactions);
  if (cleaned.empty()) {
    throw Error(ErrorCategory::kData, "empty after preprocessing");
  }
  PreprocessResult result;
  result.split = corpus::remove_cold_start(corpus::temporal_split(
      cleaned, config.data.train_ratio, config.data.val_ratio, config.data.test_ratio));
  return result;
}

trainer::TrainResult train_model(const corpus::Dataset& data, const RunConfig& config) {
  config.validate();
  return trainer::train(data, config.temporal, config.train, config.weighting);
}

recsys::MetricsReport evaluate_model(const trainer::EmbeddingModel& model,
                                     const corpus::Dataset& history,
                                     const corpus::Dataset& target, const RunConfig& config) {
  std::vector<int> cutoffs = config.eval.cutoffs;
  if (std::find(cutoffs.begin(), cutoffs.end(), config.eval.selection_cutoff) == cutoffs.end()) {
    cutoffs.push_back(config.eval.selection_cutoff);
    std::sort(cutoffs.begin(), cutoffs.end());
  }
  return recsys::evaluate(model, history, target, cutoffs, config.eval.negative_ratio, config.seed);
}

json report_to_json(const recsys::MetricsReport& report) {
  json ndcg = json::object();
  json hitrate = json::object();
  for (const auto& [cutoff, value] : report.ndcg_at) ndcg[std::to_string(cutoff)] = value;
  for (const auto& [cutoff, value] : report.hitrate_at) hitrate[std::to_string(cutoff)] = value;
  return json{{"ndcg", ndcg},
              {"hitrate", hitrate},
              {"rmse", report.rmse},
              {"users_evaluated", report.users_evaluated}};
}

GridSpec GridSpec::from_json(const json& j) {
  GridSpec grid;
  try {
    auto read = [&j](const char* key, auto& out) {
      if (j.contains(key)) out = j[key].get<std::decay_t<decltype(out)>>();
    };
    read("mode", grid.modes);
    read("window", grid.windows);
    read("neg_exponent", grid.neg_exponents);
    read("subsample_t", grid.subsample_ts);
    read("learning_rate", grid.learning_rates);
    read("epochs", grid.epochs);
    read("lambda", grid.lambdas);
    read("alpha", grid.alphas);
    read("w_min", grid.w_mins);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kUsage, std::string("bad grid spec: ") + e.what());
  }
  return grid;
}

std::vector<RunConfig> GridSpec::expand(const RunConfig& base) const {
  auto or_base = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  const auto mode_list = or_base(modes, std::string(weighting::mode_name(base.weighting.mode)));
  const auto window_list = or_base(windows, base.train.window);
  const auto eta_list = or_base(neg_exponents, base.train.neg_exponent);
  const auto t_list = or_base(subsample_ts, base.train.subsample_t);
  const auto lr_list = or_base(learning_rates, base.train.learning_rate);
  const auto epoch_list = or_base(epochs, base.train.epochs);
  const auto lambda_list = or_base(lambdas, base.weighting.lambda);
  const auto alpha_list = or_base(alphas, base.weighting.alpha);
  const auto w_min_list = or_base(w_mins, base.weighting.w_min);

  std::vector<RunConfig> points;
  std::set<std::string> seen;
  for (const auto& mode_name : mode_list) {
    const auto mode = weighting::parse_mode(mode_name);
    for (int window : window_list)
      for (double eta : eta_list)
        for (double t : t_list)
          for (double lr : lr_list)
            for (int epoch_count : epoch_list)
              for (double lambda : lambda_list)
                for (double alpha : alpha_list)
                  for (double w_min : w_min_list) {
                    RunConfig point = base;
                    point.weighting.mode = mode;
                    point.train.window = window;
                    point.train.neg_exponent = eta;
                    point.train.subsample_t = t;
                    point.train.learning_rate = lr;
                    point.train.epochs = epoch_count;
                    if (mode == weighting::WeightMode::kDisc) point.weighting.lambda = lambda;
                    if (mode == weighting::WeightMode::kCont) {
                      point.weighting.alpha = alpha;
                      point.weighting.w_min = w_min;
                    }
                    point.finalize();
                    if (seen.insert(config_hash(point)).second) {
                      points.push_back(std::move(point));
                    }
                  }
  }
  if (points.empty()) {
    throw Error(ErrorCategory::kUsage, "grid is empty");
  }
  return points;
}

double GridResult::selection_score(size_t index) const {
  const auto& point = points[index];
  if (!point.metrics) return -std::numeric_limits<double>::infinity();
  auto it = point.metrics->ndcg_at.find(point.config.eval.selection_cutoff);
  return it == point.metrics->ndcg_at.end() ? -std::numeric_limits<double>::infinity() : it->second;
}

GridResult grid_search(const corpus::SplitResult& split, const RunConfig& base,
                       const GridSpec& grid, int jobs) {
  GridResult result;
  for (auto& config : grid.expand(base)) {
    result.points.push_back({std::move(config), std::nullopt, {}});
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      const size_t index = next.fetch_add(1);
      if (index >= result.points.size()) break;
      GridPoint& point = result.points[index];
      try {
        const auto trained = train_model(split.train, point.config);
        point.metrics = evaluate_model(trained.model, split.train, split.validation, point.config);
      } catch (const std::exception& e) {
        point.error = e.what();
      }
    }
  };
  const auto thread_count =
      static_cast<size_t>(std::clamp<int>(jobs, 1, static_cast<int>(result.points.size())));
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }
  for (size_t i = 0; i < result.points.size(); ++i) {
    if (!result.points[i].metrics) continue;
    if (!result.best || result.selection_score(i) > result.selection_score(*result.best)) {
      result.best = i;
    }
  }
  return result;
}

void write_grid_table(std::ostream& out, const GridResult& result, int selection_cutoff) {
  const std::string ndcg_col = "ndcg@" + std::to_string(selection_cutoff);
  const std::string hr_col = "hitrate@" + std::to_string(selection_cutoff);
  out << "point\tmode\twindow\tneg_exponent\tsubsample_t\tlearning_rate\tepochs\tlambda\talpha\tw_min\t"
      << ndcg_col << '\t' << hr_col << "\trmse\tstatus\n";
  for (size_t i = 0; i < result.points.size(); ++i) {
    const auto& point = result.points[i];
    const auto& c = point.config;
    out << i << '\t' << weighting::mode_name(c.weighting.mode) << '\t' << c.train.window << '\t'
        << text::format_double(c.train.neg_exponent) << '\t'
        << text::format_double(c.train.subsample_t) << '\t'
        << text::format_double(c.train.learning_rate) << '\t' << c.train.epochs << '\t'
        << text::format_double(c.weighting.lambda) << '\t'
        << text::format_double(c.weighting.alpha) << '\t'
        << text::format_double(c.weighting.w_min) << '\t';
    if (point.metrics) {
      auto value_at = [&](const std::map<int, double>& m) {
        auto it = m.find(selection_cutoff);
        return it == m.end() ? std::string("NA") : text::format_double(it->second);
      };
      out << value_at(point.metrics->ndcg_at) << '\t' << value_at(point.metrics->hitrate_at)
          << '\t' << text::format_double(point.metrics->rmse) << "\tok";
    } else {
      std::string message = point.error;
      std::replace(message.begin(), message.end(), '\t', ' ');
      std::replace(message.begin(), message.end(), '\n', ' ');
      out << "NA\tNA\tNA\terror: " << message;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

std::string split_path(const RunConfig& config, const std::string& name) {
  return (fs::path(config.output_dir) / (name + ".csv")).string();
}

corpus::Dataset read_split(const RunConfig& config, const std::string& name) {
  const std::string path = split_path(config, name);
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::kIo, "cannot open " + path + " (run preprocess first)");
  }
  std::string header;
  std::getline(in, header);
  const bool with_rating = header.find("rating") != std::string::npos;
  in.clear();
  in.seekg(0);
  corpus::Dataset data;
  // An empty split (header only) is legal.
  std::string second;
  std::getline(in, header);
  if (!std::getline(in, second)) {
    data.rating_range = config.data.rating_range;
    return data;
  }
  in.clear();
  in.seekg(0);
  data = corpus::load_interactions(in, corpus::canonical_mapping(with_rating)).dataset;
  data.rating_range = config.data.rating_range;
  return data;
}

std::string cmd_preprocess(const RunConfig& config) {
  config.validate();
  if (config.data.path.empty()) {
    throw Error(ErrorCategory::kUsage, "data.path is not set");
  }
  const auto loaded = corpus::load_interactions_file(config.data.path, config.data.mapping);
  auto result = preprocess(loaded.dataset, config);
  ensure_directory(config.output_dir);
  corpus::write_interactions_file(split_path(config, "train"), result.split.train);
  corpus::write_interactions_file(split_path(config, "validation"), result.split.validation);
  corpus::write_interactions_file(split_path(config, "test"), result.split.test);

  const std::string summary_path = (fs::path(config.output_dir) / "summary.txt").string();
  auto out = open_output(summary_path);
  out << "source=" << config.data.path << '\n'
      << "raw_interactions=" << loaded.dataset.size() << '\n'
      << "skipped_rows=" << loaded.skipped_rows << '\n';
  const corpus::Dataset all = [&] {
    corpus::Dataset merged = corpus::merge_train_val(result.split);
    merged.interactions.insert(merged.interactions.end(), result.split.test.interactions.begin(),
                               result.split.test.interactions.end());
    return merged;
  }();
  corpus::write_summary(out, corpus::summarize(all));
  out << "train_interactions=" << result.split.train.size() << '\n'
      << "validation_interactions=" << result.split.validation.size() << '\n'
      << "test_interactions=" << result.split.test.size() << '\n'
      << "train_end=" << result.split.train_end << '\n'
      << "val_end=" << result.split.val_end << '\n';
  return summary_path;
}

std::string cmd_train(const RunConfig& config, TrainOn on, const std::string& model_path) {
  config.validate();
  const corpus::Dataset data = on == TrainOn::kTrain
                                   ? read_split(config, "train")
                                   : corpus::merge_train_val({read_split(config, "train"),
                                                              read_split(config, "validation"),
                                                              {}, 0, 0});
  const auto trained = train_model(data, config);
  ensure_directory(config.output_dir);
  const std::string tag = config_hash(config) + (on == TrainOn::kTrain ? "-train" : "-final");
  const std::string path =
      model_path.empty() ? (fs::path(config.output_dir) / ("model-" + tag + ".txt")).string()
                         : model_path;
  trainer::write_model_file(path, trained.model, /*with_context_sidecar=*/true);
  {
    auto log = open_output(path + ".log");
    trainer::write_training_log(log, trained.log);
  }
  {
    auto echo = open_output(path + ".config.json");
    echo << config_to_json(config).dump(2) << '\n';
  }
  return path;
}

std::string cmd_evaluate(const RunConfig& config, const std::string& model_path, EvaluateOn on,
                         const std::string& report_path) {
  config.validate();
  const auto model = trainer::read_model_file(model_path);
  const corpus::Dataset train = read_split(config, "train");
  corpus::Dataset history;
  corpus::Dataset target;
  if (on == EvaluateOn::kTest) {
    history = corpus::merge_train_val({train, read_split(config, "validation"), {}, 0, 0});
    target = read_split(config, "test");
  } else {
    history = train;
    target = read_split(config, "validation");
  }
  const auto report = evaluate_model(model, history, target, config);

  const std::string split_name = on == EvaluateOn::kTest ? "test" : "validation";
  const std::string model_name = fs::path(model_path).filename().string();
  json document = report_to_json(report);
  document["split"] = split_name;
  document["model"] = model_name;
  document["seed"] = config.seed;
  document["negative_ratio"] = config.eval.negative_ratio;
  document["config"] = config_to_json(config);

  ensure_directory(config.output_dir);
  const std::string path =
      report_path.empty()
          ? (fs::path(config.output_dir) /
             ("metrics-" + hex64(fnv1a(config_hash(config) + model_name + split_name)) + ".json"))
                .string()
          : report_path;
  auto out = open_output(path);
  out << document.dump(2) << '\n';
  return path;
}

recsys::RankedList cmd_recommend(const RunConfig& config, const RecommendRequest& request,
                                 std::ostream& out, std::ostream& warn) {
  if (request.k < 1) {
    throw Error(ErrorCategory::kUsage, "k must be >= 1");
  }
  const auto model = trainer::read_model_file(request.model_path);
  std::vector<std::string> history_items;
  std::string user_id = request.user_id;
  if (!request.history_path.empty()) {
    std::ifstream in(request.history_path);
    if (!in) {
      throw Error(ErrorCategory::kIo, "cannot open history " + request.history_path);
    }
    std::string line;
    while (std::getline(in, line)) {
      auto item = text::trim(line);
      if (!item.empty()) history_items.emplace_back(item);
    }
    if (user_id.empty()) user_id = "history";
  } else if (!user_id.empty()) {
    const corpus::Dataset data =
        corpus::merge_train_val({read_split(config, "train"), read_split(config, "validation"), {}, 0, 0});
    for (const auto& interaction : data.interactions) {
      if (interaction.user_id == user_id) history_items.push_back(interaction.item_id);
    }
    if (history_items.empty()) {
      throw Error(ErrorCategory::kData, "unknown user '" + user_id + "'");
    }
  } else {
    throw Error(ErrorCategory::kUsage, "recommend needs --user or --history");
  }

  std::vector<temporal::ItemIndex> history;
  for (const auto& item : history_items) {
    auto index = model.vocabulary.find(item);
    if (!index) {
      warn << "warning: item '" << item << "' is not in the model vocabulary; skipped\n";
      continue;
    }
    if (std::find(history.begin(), history.end(), *index) == history.end()) {
      history.push_back(*index);
    }
  }
  if (history.empty()) {
    throw Error(ErrorCategory::kData, "no history item is in the model vocabulary");
  }
  const auto user = recsys::user_vector(history, model, user_id);
  const std::unordered_set<temporal::ItemIndex> consumed(history.begin(), history.end());
  auto ranked = recsys::top_k(user, model, consumed, request.k);
  if (ranked.items.empty()) {
    warn << "warning: history covers the whole vocabulary; no candidates left\n";
  }
  out << "user_id\trank\titem_id\tscore\n";
  for (size_t r = 0; r < ranked.items.size(); ++r) {
    out << user_id << '\t' << (r + 1) << '\t' << ranked.items[r].item_id << '\t'
        << text::format_double(ranked.items[r].score) << '\n';
  }
  return ranked;
}

std::string cmd_grid_search(const RunConfig& config, const GridSpec& grid, int jobs) {
  config.validate();
  corpus::SplitResult split;
  split.train = read_split(config, "train");
  split.validation = read_split(config, "validation");
  const auto result = grid_search(split, config, grid, jobs);

  ensure_directory(config.output_dir);
  const std::string table_path = (fs::path(config.output_dir) / "grid_results.tsv").string();
  {
    auto out = open_output(table_path);
    write_grid_table(out, result, config.eval.selection_cutoff);
  }
  auto best_out = open_output((fs::path(config.output_dir) / "best_config.json").string());
  if (result.best) {
    json best = config_to_json(result.points[*result.best].config);
    best["validation"] = report_to_json(*result.points[*result.best].metrics);
    best_out << best.dump(2) << '\n';
  } else {
    best_out << "null\n";
    throw Error(ErrorCategory::kTraining, "every grid point failed; see " + table_path);
  }
  return table_path;
}

void write_stats(std::ostream& table, std::ostream& summary, const corpus::Dataset& data,
                 const RunConfig& config) {
  const auto corpus = trainer::build_training_corpus(data, config.temporal, config.weighting);
  table << "user_id\tevents\tintervals\tq1\tq3\ttau\tmu\tsigma\tsessions\tdegenerate\n";
  double gap_sum = 0.0;
  size_t gap_count = 0;
  size_t degenerate = 0;
  for (size_t u = 0; u < corpus.timelines.size(); ++u) {
    const auto& timeline = corpus.timelines[u];
    const auto& profile = corpus.profiles[u];
    for (size_t k = 1; k < timeline.events.size(); ++k) {
      gap_sum += static_cast<double>(timeline.events[k].timestamp - timeline.events[k - 1].timestamp);
      ++gap_count;
    }
    if (profile.degenerate) ++degenerate;
    table << timeline.user_id << '\t' << timeline.events.size() << '\t'
          << profile.valid_intervals.size() << '\t' << optional_number(profile.q1) << '\t'
          << optional_number(profile.q3) << '\t'
          << (std::isinf(profile.tau) ? std::string("inf") : text::format_double(profile.tau))
          << '\t' << optional_number(profile.mu) << '\t' << optional_number(profile.sigma) << '\t'
          << profile.session_count() << '\t' << (profile.degenerate ? "true" : "false") << '\n';
  }
  const auto summary_data = corpus::summarize(data);
  corpus::write_summary(summary, summary_data);
  summary << "degenerate_users=" << degenerate << '\n'
          << "mean_interarrival_days="
          << (gap_count ? text::format_double(gap_sum / static_cast<double>(gap_count) / 86400.0)
                        : std::string("NA"))
          << '\n';
}

std::string cmd_stats(const RunConfig& config, const std::string& split_name) {
  config.validate();
  const corpus::Dataset data =
      split_name == "train+validation"
          ? corpus::merge_train_val({read_split(config, "train"), read_split(config, "validation"), {}, 0, 0})
          : read_split(config, split_name);
  ensure_directory(config.output_dir);
  const std::string table_path = (fs::path(config.output_dir) / "stats.tsv").string();
  auto table = open_output(table_path);
  auto summary = open_output((fs::path(config.output_dir) / "stats_summary.txt").string());
  write_stats(table, summary, data, config);
  return table_path;
}

void write_curves(std::ostream& out, const corpus::Dataset& data, const RunConfig& config,
                  const CurveRequest& request) {
  weighting::WeightConfig cont = config.weighting;
  cont.mode = weighting::WeightMode::kCont;
  cont.validate();
  const auto corpus = trainer::build_training_corpus(data, config.temporal, cont);
  size_t position = 0;
  const auto& timeline = find_timeline(corpus, request.user_id, &position);
  const auto& profile = corpus.profiles[position];
  const size_t n = timeline.events.size();

  std::vector<size_t> anchors = request.anchors;
  if (anchors.empty()) {
    anchors = {0, n / 2, n - 1};
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  }
  out << "anchor\tevent_index\tdistance_days\tlocal\tglobal\tunified\n";
  for (size_t anchor : anchors) {
    if (anchor >= n) {
      throw Error(ErrorCategory::kUsage, "anchor " + std::to_string(anchor) + " out of range");
    }
    for (size_t j = 0; j < n; ++j) {
      const auto point = weighting::cont_components(profile, anchor, j, cont, config.temporal.epsilon);
      const double days =
          std::abs(static_cast<double>(timeline.events[j].timestamp - timeline.events[anchor].timestamp)) /
          86400.0;
      out << anchor << '\t' << j << '\t' << text::format_double(days) << '\t'
          << (point.has_local ? text::format_double(point.local) : std::string("NA")) << '\t'
          << text::format_double(point.global) << '\t' << text::format_double(point.unified) << '\n';
    }
  }
}

std::string cmd_export_curves(const RunConfig& config, const CurveRequest& request) {
  config.validate();
  const corpus::Dataset data =
      corpus::merge_train_val({read_split(config, "train"), read_split(config, "validation"), {}, 0, 0});
  ensure_directory(config.output_dir);
  std::string safe_user = request.user_id;
  for (char& c : safe_user) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  const std::string path = (fs::path(config.output_dir) / ("curves-" + safe_user + ".tsv")).string();
  std::ostringstream buffer;
  write_curves(buffer, data, config, request);
  auto out = open_output(path);
  out << buffer.str();
  return path;
}

}  // namespace tai2vec::pipeline
