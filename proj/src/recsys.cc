/**
 * @file recsys.cc
 * @brief Recommendation and evaluation
 */

#include "tai2vec/recsys.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "tai2vec/error.h"

namespace tai2vec::recsys {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (size_t d = 0; d < a.size(); ++d) sum += a[d] * b[d];
  return sum;
}

bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item_id < b.item_id;
}

struct TestUser {
  std::vector<ItemIndex> history;
  std::unordered_set<std::string> relevant;
  std::vector<ItemIndex> positives;
};

std::map<std::string, TestUser> collect_test_users(const trainer::EmbeddingModel& model,
                                                  const corpus::Dataset& history,
                                                  const corpus::Dataset& test) {
  auto histories = user_histories(history, model.vocabulary);
  std::map<std::string, TestUser> users;
  for (const auto& interaction : test.interactions) {
    auto found = histories.find(interaction.user_id);
    if (found == histories.end()) {
      continue;  // cold-start user
    }
    auto index = model.vocabulary.find(interaction.item_id);
    if (!index) {
      throw Error(ErrorCategory::kEvaluation,
                  "vocabulary mismatch: test item '" + interaction.item_id + "' not in model");
    }
    TestUser& user = users[interaction.user_id];
    user.history = found->second;
    if (user.relevant.insert(interaction.item_id).second) {
      user.positives.push_back(*index);
    }
  }
  return users;
}

}  // namespace

std::vector<double> normalized(std::span<const double> x) {
  const double norm = std::sqrt(dot(x, x));
  std::vector<double> out(x.begin(), x.end());
  if (norm > 0.0) {
    for (double& v : out) v /= norm;
  }
  return out;
}

UserVector user_vector(std::span<const ItemIndex> history, const trainer::EmbeddingModel& model,
                       std::string user_id) {
  if (history.empty()) {
    throw Error(ErrorCategory::kEvaluation, "empty history for user '" + user_id + "'");
  }
  UserVector user;
  user.user_id = std::move(user_id);
  user.history_size = history.size();
  user.vector.assign(model.dim(), 0.0);
  for (ItemIndex item : history) {
    if (item >= model.vocabulary.size()) {
      throw Error(ErrorCategory::kEvaluation, "history item index out of range");
    }
    auto unit = normalized(model.target.row(item));
    for (size_t d = 0; d < unit.size(); ++d) user.vector[d] += unit[d];
  }
  for (double& v : user.vector) v /= static_cast<double>(history.size());
  return user;
}

double score(const UserVector& user, ItemIndex item, const trainer::EmbeddingModel& model) {
  return dot(user.vector, normalized(model.target.row(item)));
}

RankedList top_k(const UserVector& user, const trainer::EmbeddingModel& model,
                 const std::unordered_set<ItemIndex>& consumed, size_t k) {
  RankedList ranked;
  ranked.user_id = user.user_id;
  std::vector<ScoredItem> candidates;
  candidates.reserve(model.vocabulary.size());
  for (size_t i = 0; i < model.vocabulary.size(); ++i) {
    const auto index = static_cast<ItemIndex>(i);
    if (consumed.count(index)) continue;
    candidates.push_back({model.vocabulary.item(index), score(user, index, model)});
  }
  const size_t keep = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<ptrdiff_t>(keep),
                    candidates.end(), ranks_before);
  candidates.resize(keep);
  ranked.items = std::move(candidates);
  return ranked;
}

double ndcg_at_n(const RankedList& ranked, const std::unordered_set<std::string>& relevant,
                 size_t n) {
  if (relevant.empty()) {
    return 0.0;
  }
  double dcg = 0.0;
  const size_t depth = std::min(n, ranked.items.size());
  for (size_t r = 0; r < depth; ++r) {
    if (relevant.count(ranked.items[r].item_id)) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double ideal = 0.0;
  const size_t ideal_depth = std::min(n, relevant.size());
  for (size_t r = 0; r < ideal_depth; ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / ideal;
}

double hit_rate_at_n(const RankedList& ranked, const std::unordered_set<std::string>& relevant,
                     size_t n) {
  const size_t depth = std::min(n, ranked.items.size());
  for (size_t r = 0; r < depth; ++r) {
    if (relevant.count(ranked.items[r].item_id)) return 1.0;
  }
  return 0.0;
}

std::map<std::string, std::vector<ItemIndex>> user_histories(
    const corpus::Dataset& history, const trainer::Vocabulary& vocabulary) {
  std::map<std::string, std::vector<ItemIndex>> histories;
  for (const auto& interaction : history.interactions) {
    auto index = vocabulary.find(interaction.item_id);
    if (!index) {
      throw Error(ErrorCategory::kEvaluation,
                  "vocabulary mismatch: history item '" + interaction.item_id + "' not in model");
    }
    auto& items = histories[interaction.user_id];
    if (std::find(items.begin(), items.end(), *index) == items.end()) {
      items.push_back(*index);
    }
  }
  return histories;
}

double prediction_rmse(std::span<const double> predicted, std::span<const double> labels) {
  if (predicted.size() != labels.size() || predicted.empty()) {
    throw Error(ErrorCategory::kEvaluation, "rmse needs equally sized, non-empty inputs");
  }
  double squared = 0.0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const double error = predicted[i] - labels[i];
    squared += error * error;
  }
  return std::sqrt(squared / static_cast<double>(predicted.size()));
}

double rmse(const trainer::EmbeddingModel& model, const corpus::Dataset& test,
            const corpus::Dataset& history, int negative_ratio, uint64_t seed) {
  if (negative_ratio < 0) {
    throw Error(ErrorCategory::kUsage, "negative_ratio must be >= 0");
  }
  const auto users = collect_test_users(model, history, test);
  if (users.empty()) {
    throw Error(ErrorCategory::kEvaluation, "no evaluable users");
  }
  std::mt19937_64 rng(seed);
  const size_t n = model.vocabulary.size();
  std::vector<double> predicted;
  std::vector<double> labels;
  for (const auto& [user_id, user] : users) {
    const UserVector u = user_vector(user.history, model, user_id);
    std::unordered_set<ItemIndex> consumed(user.history.begin(), user.history.end());
    consumed.insert(user.positives.begin(), user.positives.end());
    const bool has_pool = consumed.size() < n;
    for (ItemIndex positive : user.positives) {
      predicted.push_back((score(u, positive, model) + 1.0) / 2.0);
      labels.push_back(1.0);
      if (!has_pool) continue;
      for (int s = 0; s < negative_ratio; ++s) {
        ItemIndex negative = 0;
        do {
          negative = static_cast<ItemIndex>(rng() % n);
        } while (consumed.count(negative));
        predicted.push_back((score(u, negative, model) + 1.0) / 2.0);
        labels.push_back(0.0);
      }
    }
  }
  return prediction_rmse(predicted, labels);
}

MetricsReport evaluate(const trainer::EmbeddingModel& model, const corpus::Dataset& history,
                       const corpus::Dataset& test, const std::vector<int>& cutoffs,
                       int negative_ratio, uint64_t seed) {
  if (cutoffs.empty() ||
      std::any_of(cutoffs.begin(), cutoffs.end(), [](int c) { return c < 1; })) {
    throw Error(ErrorCategory::kUsage, "cutoffs must be a non-empty list of values >= 1");
  }
  const auto users = collect_test_users(model, history, test);
  if (users.empty()) {
    throw Error(ErrorCategory::kEvaluation, "no evaluable users");
  }
  const auto depth = static_cast<size_t>(*std::max_element(cutoffs.begin(), cutoffs.end()));
  MetricsReport report;
  for (int cutoff : cutoffs) {
    report.ndcg_at[cutoff] = 0.0;
    report.hitrate_at[cutoff] = 0.0;
  }
  for (const auto& [user_id, user] : users) {
    const UserVector u = user_vector(user.history, model, user_id);
    const std::unordered_set<ItemIndex> consumed(user.history.begin(), user.history.end());
    const RankedList ranked = top_k(u, model, consumed, depth);
    for (int cutoff : cutoffs) {
      report.ndcg_at[cutoff] += ndcg_at_n(ranked, user.relevant, static_cast<size_t>(cutoff));
      report.hitrate_at[cutoff] += hit_rate_at_n(ranked, user.relevant, static_cast<size_t>(cutoff));
    }
  }
  report.users_evaluated = users.size();
  const auto denominator = static_cast<double>(users.size());
  for (auto& [cutoff, value] : report.ndcg_at) value /= denominator;
  for (auto& [cutoff, value] : report.hitrate_at) value /= denominator;
  report.rmse = rmse(model, test, history, negative_ratio, seed);
  return report;
}

}  // namespace tai2vec::recsys
