/**
 * @file corpus.h
 * @brief Interaction log ingestion, cleaning and leakage-free temporal splits
 *
 * The cleaning pipeline runs dedupe -> binarize -> kcore_filter, then
 * temporal_split -> remove_cold_start. Every operation is a pure function of
 * its inputs.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tai2vec::corpus {

struct Interaction {
  std::string user_id;
  std::string item_id;
  int64_t timestamp = 0;  // seconds since epoch
  std::optional<double> rating;

  bool operator==(const Interaction&) const = default;
};

struct RatingRange {
  double min = 0.0;
  double max = 0.0;

  double midpoint() const { return (min + max) / 2.0; }
  bool operator==(const RatingRange&) const = default;
};

/// Interactions sorted ascending by (timestamp, user_id, item_id).
struct Dataset {
  std::vector<Interaction> interactions;
  std::optional<RatingRange> rating_range;

  size_t size() const { return interactions.size(); }
  bool empty() const { return interactions.empty(); }
  bool operator==(const Dataset&) const = default;
};

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
  int64_t train_end = 0;  // last training timestamp
  int64_t val_end = 0;    // last validation timestamp (train_end if none)
};

/// How raw columns map onto interaction fields. A column is referenced by
/// header name when the file has a header and the name is present, otherwise
/// by zero-based index.
struct ColumnMapping {
  char delimiter = ',';
  bool has_header = true;
  std::string user_column = "user";
  std::string item_column = "item";
  std::string timestamp_column = "timestamp";
  std::string rating_column;  // empty: implicit feedback
  double timestamp_scale = 1.0;  // raw value * scale = seconds
};

struct LoadResult {
  Dataset dataset;
  size_t skipped_rows = 0;
};

struct DatasetSummary {
  size_t users = 0;
  size_t items = 0;
  size_t interactions = 0;
  int64_t first_timestamp = 0;
  int64_t last_timestamp = 0;
};

/// Strict ordering used everywhere: (timestamp, user_id, item_id).
bool chronological_less(const Interaction& lhs, const Interaction& rhs);

void sort_chronologically(std::vector<Interaction>& interactions);

LoadResult load_interactions(std::istream& source, const ColumnMapping& mapping);
LoadResult load_interactions_file(const std::string& path, const ColumnMapping& mapping);

/// Keeps ratings strictly above the range midpoint. A missing range is a
/// no-op (implicit feedback).
Dataset binarize(const Dataset& dataset, const std::optional<RatingRange>& range);

/// Earliest interaction wins for each (user, item) pair.
Dataset dedupe(const Dataset& dataset);

/// Maximal subset where every user and every item has at least `k`
/// interactions, found by iterating removal to a fixed point.
Dataset kcore_filter(const Dataset& dataset, int k);

/// Positional split of the time-sorted sequence using cumulative floor
/// boundaries: train = [0, floor(n*r0)), validation = [.., floor(n*(r0+r1))),
/// test = the rest.
SplitResult temporal_split(const Dataset& dataset, double train_ratio = 0.8,
                           double val_ratio = 0.1, double test_ratio = 0.1);

/// Drops validation/test interactions whose user or item never occurs in train.
SplitResult remove_cold_start(const SplitResult& split);

Dataset merge_train_val(const SplitResult& split);

/// dedupe -> binarize -> kcore_filter.
Dataset clean(const Dataset& dataset, const std::optional<RatingRange>& range, int k);

DatasetSummary summarize(const Dataset& dataset);

/// Canonical output: header row then one sorted row per interaction.
void write_interactions(std::ostream& out, const Dataset& dataset, char delimiter = ',');
void write_interactions_file(const std::string& path, const Dataset& dataset,
                             char delimiter = ',');

/// Mapping that reads files produced by write_interactions.
ColumnMapping canonical_mapping(bool with_rating, char delimiter = ',');

void write_summary(std::ostream& out, const DatasetSummary& summary);

}  // namespace tai2vec::corpus
