/**
 * @file trainer.h
 * @brief Weighted skip-gram with negative sampling over user histories
 *
 * Each (target, context) pair inside the window contributes
 *
 *   L = -w * [log s(v_t . c_c) + sum_n log s(-v_t . c_n)]
 *
 * where w is the pair weight chosen by the weighting regime, v rows live in
 * the target matrix (the published embeddings) and c rows in the context
 * matrix. With every weight equal to 1 this is plain Item2Vec.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tai2vec/corpus.h"
#include "tai2vec/temporal.h"
#include "tai2vec/weighting.h"

namespace tai2vec::trainer {

using temporal::ItemIndex;
using Rng = std::mt19937_64;

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Indices in descending frequency order, ties by item_id.
  static Vocabulary build(const corpus::Dataset& train);

  /// Keeps the given order; every frequency is set to 1.
  static Vocabulary from_items(std::vector<std::string> items);

  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::optional<ItemIndex> find(std::string_view item_id) const;
  const std::string& item(ItemIndex index) const { return items_[index]; }
  const std::vector<std::string>& items() const { return items_; }
  uint64_t frequency(ItemIndex index) const { return frequencies_[index]; }
  uint64_t total() const { return total_; }

 private:
  std::vector<std::string> items_;
  std::vector<uint64_t> frequencies_;
  std::unordered_map<std::string, ItemIndex> index_;
  uint64_t total_ = 0;
};

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  bool operator==(const Matrix&) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

struct EmbeddingModel {
  Vocabulary vocabulary;
  Matrix target;   // published item vectors
  Matrix context;  // auxiliary output vectors

  size_t dim() const { return target.cols(); }
  bool all_finite() const;
};

enum class Optimizer { kSgdLinearDecay, kAdaptiveMoments };

std::string_view optimizer_name(Optimizer optimizer);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  int dim = 50;
  int window = 10;
  int negatives = 7;
  double neg_exponent = 0.75;
  double subsample_t = 1e-3;
  double learning_rate = 0.025;
  int epochs = 20;
  // Unit of work handed to a worker thread; does not change the loss.
  int batch_size = 16384;
  uint64_t seed = 42;
  int workers = 1;
  Optimizer optimizer = Optimizer::kSgdLinearDecay;
  // Replaces every computed pair weight by 1. Reference Item2Vec path.
  bool unit_weights = false;

  void validate() const;
};

struct TrainingPair {
  ItemIndex target = 0;
  ItemIndex context = 0;
  double weight = 1.0;

  bool operator==(const TrainingPair&) const = default;
};

/// min(1, sqrt(t/f) + t/f); t == 0 keeps everything.
double subsample_keep_probability(double freq_fraction, double t);

/// Pairs (p, q) with 0 < |p - q| <= window over the original positions,
/// both kept by the mask, distinct items. Target-major, context ascending.
std::vector<TrainingPair> generate_pairs(const temporal::UserTimeline& timeline,
                                         const temporal::UserTemporalProfile& profile,
                                         int window, const weighting::WeightConfig& config,
                                         std::span<const char> keep_mask, double epsilon);

/// Draws item indices with probability proportional to frequency^eta using
/// Walker's alias method.
class NegativeSampler {
 public:
  NegativeSampler() = default;
  explicit NegativeSampler(std::span<const double> weights);

  ItemIndex draw(Rng& rng) const;
  double probability(ItemIndex index) const { return probabilities_[index]; }
  size_t size() const { return probabilities_.size(); }

 private:
  std::vector<double> probabilities_;
  std::vector<double> accept_;
  std::vector<ItemIndex> alias_;
};

NegativeSampler negative_table(const Vocabulary& vocabulary, double eta);

/// Exact gradient of the weighted pair loss, evaluated at the current state.
struct SgnsGradient {
  std::vector<double> target;                // d/dv_t
  std::vector<ItemIndex> rows;               // context row, then negatives
  std::vector<std::vector<double>> row_grads;  // d/dc_row, aligned with rows
  double loss = 0.0;
};

SgnsGradient sgns_gradient(const TrainingPair& pair, std::span<const ItemIndex> negatives,
                           const EmbeddingModel& model);

/// Plain SGD step: parameters -= lr * gradient. Returns the pair loss before
/// the update. Throws kTraining on non-finite values.
double sgns_step(const TrainingPair& pair, std::span<const ItemIndex> negatives,
                 EmbeddingModel& model, double lr);

/// lr * (1 - step/total * 0.99).
double learning_rate_at(double initial, size_t step, size_t total);

/// Vocabulary, per-user timelines and temporal profiles for one dataset.
struct TrainingCorpus {
  Vocabulary vocabulary;
  std::vector<temporal::UserTimeline> timelines;  // sorted by user_id
  std::vector<temporal::UserTemporalProfile> profiles;
};

TrainingCorpus build_training_corpus(const corpus::Dataset& data,
                                     const temporal::TemporalConfig& temporal_config,
                                     const weighting::WeightConfig& weight_config);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;  // at the end of the epoch
  size_t pairs = 0;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<EpochLog> log;
};

TrainResult train(const TrainingCorpus& corpus, const TrainConfig& train_config,
                  const weighting::WeightConfig& weight_config, double epsilon);

TrainResult train(const corpus::Dataset& data, const temporal::TemporalConfig& temporal_config,
                  const TrainConfig& train_config, const weighting::WeightConfig& weight_config);

/// "<vocab_size> <dim>" header, then "item_id v_1 ... v_d" per row.
void write_embeddings(std::ostream& out, const Vocabulary& vocabulary, const Matrix& matrix);
void write_model_file(const std::string& path, const EmbeddingModel& model,
                      bool with_context_sidecar = false);
void write_training_log(std::ostream& out, const std::vector<EpochLog>& log);

/// Reads a target-matrix file; the context matrix is loaded from the sidecar
/// when present, otherwise left zero.
EmbeddingModel read_model(std::istream& in);
EmbeddingModel read_model_file(const std::string& path);

std::string context_sidecar_path(const std::string& model_path);

}  // namespace tai2vec::trainer
