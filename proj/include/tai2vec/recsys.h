/**
 * @file recsys.h
 * @brief Centroid user vectors, cosine top-K ranking and ranking metrics
 *
 * Item vectors are L2-normalized before aggregation, so a user's score for a
 * candidate is exactly the mean cosine between the candidate and each
 * history item.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tai2vec/corpus.h"
#include "tai2vec/trainer.h"

namespace tai2vec::recsys {

using temporal::ItemIndex;

struct UserVector {
  std::string user_id;
  std::vector<double> vector;
  size_t history_size = 0;
};

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

/// Sorted by (score desc, item_id asc).
struct RankedList {
  std::string user_id;
  std::vector<ScoredItem> items;
};

struct MetricsReport {
  std::map<int, double> ndcg_at;
  std::map<int, double> hitrate_at;
  double rmse = 0.0;
  size_t users_evaluated = 0;
};

/// x / |x|; the zero vector stays zero.
std::vector<double> normalized(std::span<const double> x);

UserVector user_vector(std::span<const ItemIndex> history, const trainer::EmbeddingModel& model,
                       std::string user_id = {});

/// u . normalize(v_item); a zero-norm candidate scores 0.
double score(const UserVector& user, ItemIndex item, const trainer::EmbeddingModel& model);

RankedList top_k(const UserVector& user, const trainer::EmbeddingModel& model,
                 const std::unordered_set<ItemIndex>& consumed, size_t k);

/// 0 when `relevant` is empty.
double ndcg_at_n(const RankedList& ranked, const std::unordered_set<std::string>& relevant,
                 size_t n);

double hit_rate_at_n(const RankedList& ranked, const std::unordered_set<std::string>& relevant,
                     size_t n);

/// Item indices each user consumed in `history`, keyed by user_id. Throws
/// kEvaluation when an item is missing from the model vocabulary.
std::map<std::string, std::vector<ItemIndex>> user_histories(
    const corpus::Dataset& history, const trainer::Vocabulary& vocabulary);

/// sqrt(mean((predicted - label)^2)); the spans must have equal, non-zero length.
double prediction_rmse(std::span<const double> predicted, std::span<const double> labels);

/// Binary-label RMSE. Each test positive is scored (cosine + 1) / 2 against
/// label 1, and `negative_ratio` items drawn uniformly from the user's
/// unconsumed items against label 0.
double rmse(const trainer::EmbeddingModel& model, const corpus::Dataset& test,
            const corpus::Dataset& history, int negative_ratio, uint64_t seed);

MetricsReport evaluate(const trainer::EmbeddingModel& model, const corpus::Dataset& history,
                       const corpus::Dataset& test, const std::vector<int>& cutoffs,
                       int negative_ratio, uint64_t seed);

}  // namespace tai2vec::recsys
