/**
 * @file corpus.cc
 * @brief Interaction log ingestion, cleaning and temporal splitting
 */

#include "tai2vec/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "tai2vec/error.h"
#include "text_util.h"

namespace tai2vec::corpus {

namespace {

size_t resolve_column(const std::string& column, const std::vector<std::string>& header) {
  auto found = std::find(header.begin(), header.end(), column);
  if (found != header.end()) {
    return static_cast<size_t>(found - header.begin());
  }
  auto index = text::parse_int(column);
  if (!index || *index < 0) {
    throw Error(ErrorCategory::kUsage, "unknown column '" + column + "'");
  }
  return static_cast<size_t>(*index);
}

std::optional<int64_t> parse_timestamp(std::string_view field, double scale) {
  if (auto whole = text::parse_int(field)) {
    if (scale == 1.0) {
      return *whole;
    }
    return static_cast<int64_t>(std::floor(static_cast<double>(*whole) * scale));
  }
  if (auto real = text::parse_double(field); real && std::isfinite(*real)) {
    return static_cast<int64_t>(std::floor(*real * scale));
  }
  return std::nullopt;
}

std::string pair_key(const Interaction& interaction) {
  std::string key = interaction.user_id;
  key.push_back('\x1f');
  key += interaction.item_id;
  return key;
}

}  // namespace

bool chronological_less(const Interaction& lhs, const Interaction& rhs) {
  if (lhs.timestamp != rhs.timestamp) {
    return lhs.timestamp < rhs.timestamp;
  }
  if (lhs.user_id != rhs.user_id) {
    return lhs.user_id < rhs.user_id;
  }
  return lhs.item_id < rhs.item_id;
}

void sort_chronologically(std::vector<Interaction>& interactions) {
  std::stable_sort(interactions.begin(), interactions.end(), chronological_less);
}

LoadResult load_interactions(std::istream& source, const ColumnMapping& mapping) {
  if (!source) {
    throw Error(ErrorCategory::kIo, "interaction source is not readable");
  }
  LoadResult result;
  std::vector<std::string> header;
  std::string line;
  bool header_pending = mapping.has_header;
  size_t user_col = 0;
  size_t item_col = 0;
  size_t time_col = 0;
  std::optional<size_t> rating_col;
  bool columns_resolved = false;
  size_t timestamp_failures = 0;
  size_t data_rows = 0;

  while (std::getline(source, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (text::trim(line).empty()) {
      continue;
    }
    auto fields = text::split(line, mapping.delimiter);
    if (header_pending) {
      for (auto field : fields) {
        header.emplace_back(text::trim(field));
      }
      header_pending = false;
      continue;
    }
    if (!columns_resolved) {
      user_col = resolve_column(mapping.user_column, header);
      item_col = resolve_column(mapping.item_column, header);
      time_col = resolve_column(mapping.timestamp_column, header);
      if (!mapping.rating_column.empty()) {
        rating_col = resolve_column(mapping.rating_column, header);
      }
      columns_resolved = true;
    }
    ++data_rows;

    size_t needed = std::max({user_col, item_col, time_col, rating_col.value_or(0)});
    if (fields.size() <= needed) {
      ++result.skipped_rows;
      continue;
    }
    Interaction interaction;
    interaction.user_id = std::string(text::trim(fields[user_col]));
    interaction.item_id = std::string(text::trim(fields[item_col]));
    if (interaction.user_id.empty() || interaction.item_id.empty()) {
      ++result.skipped_rows;
      continue;
    }
    auto timestamp = parse_timestamp(text::trim(fields[time_col]), mapping.timestamp_scale);
    if (!timestamp || *timestamp < 0) {
      ++timestamp_failures;
      ++result.skipped_rows;
      continue;
    }
    interaction.timestamp = *timestamp;
    if (rating_col) {
      auto rating = text::parse_double(text::trim(fields[*rating_col]));
      if (!rating || !std::isfinite(*rating)) {
        ++result.skipped_rows;
        continue;
      }
      interaction.rating = *rating;
    }
    result.dataset.interactions.push_back(std::move(interaction));
  }
  if (source.bad()) {
    throw Error(ErrorCategory::kIo, "read error while loading interactions");
  }
  if (result.dataset.empty()) {
    if (data_rows > 0 && timestamp_failures == data_rows) {
      throw Error(ErrorCategory::kData, "timestamp column unparseable");
    }
    throw Error(ErrorCategory::kData, "no parseable rows");
  }
  sort_chronologically(result.dataset.interactions);
  return result;
}

LoadResult load_interactions_file(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::kIo, "cannot open " + path);
  }
  return load_interactions(in, mapping);
}

Dataset binarize(const Dataset& dataset, const std::optional<RatingRange>& range) {
  if (!range) {
    return dataset;
  }
  if (!(range->max > range->min)) {
    throw Error(ErrorCategory::kUsage, "rating range requires max > min");
  }
  const double midpoint = range->midpoint();
  Dataset out;
  out.rating_range = range;
  for (const auto& interaction : dataset.interactions) {
    if (!interaction.rating) {
      throw Error(ErrorCategory::kData,
                  "missing rating for user " + interaction.user_id + " item " +
                      interaction.item_id);
    }
    if (*interaction.rating > midpoint) {
      out.interactions.push_back(interaction);
    }
  }
  return out;
}

Dataset dedupe(const Dataset& dataset) {
  std::vector<Interaction> sorted = dataset.interactions;
  sort_chronologically(sorted);
  Dataset out;
  out.rating_range = dataset.rating_range;
  std::unordered_set<std::string> seen;
  for (auto& interaction : sorted) {
    if (seen.insert(pair_key(interaction)).second) {
      out.interactions.push_back(std::move(interaction));
    }
  }
  return out;
}

Dataset kcore_filter(const Dataset& dataset, int k) {
  if (k < 1) {
    throw Error(ErrorCategory::kUsage, "k-core threshold must be >= 1");
  }
  std::vector<const Interaction*> alive;
  alive.reserve(dataset.size());
  for (const auto& interaction : dataset.interactions) {
    alive.push_back(&interaction);
  }
  while (true) {
    std::unordered_map<std::string_view, int> user_counts;
    std::unordered_map<std::string_view, int> item_counts;
    for (const auto* interaction : alive) {
      ++user_counts[interaction->user_id];
      ++item_counts[interaction->item_id];
    }
    std::vector<const Interaction*> next;
    next.reserve(alive.size());
    for (const auto* interaction : alive) {
      if (user_counts[interaction->user_id] >= k && item_counts[interaction->item_id] >= k) {
        next.push_back(interaction);
      }
    }
    if (next.size() == alive.size()) {
      break;
    }
    alive = std::move(next);
  }
  Dataset out;
  out.rating_range = dataset.rating_range;
  out.interactions.reserve(alive.size());
  for (const auto* interaction : alive) {
    out.interactions.push_back(*interaction);
  }
  return out;
}

SplitResult temporal_split(const Dataset& dataset, double train_ratio, double val_ratio,
                           double test_ratio) {
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0 ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw Error(ErrorCategory::kUsage, "split ratios must be non-negative and sum to 1");
  }
  if (dataset.size() < 3) {
    throw Error(ErrorCategory::kData, "temporal split needs at least 3 interactions");
  }
  std::vector<Interaction> sorted = dataset.interactions;
  sort_chronologically(sorted);

  const auto n = static_cast<double>(sorted.size());
  auto train_end = static_cast<size_t>(std::floor(n * train_ratio + 1e-9));
  auto val_end = static_cast<size_t>(std::floor(n * (train_ratio + val_ratio) + 1e-9));
  train_end = std::min(train_end, sorted.size());
  val_end = std::clamp(val_end, train_end, sorted.size());

  SplitResult split;
  split.train.rating_range = dataset.rating_range;
  split.validation.rating_range = dataset.rating_range;
  split.test.rating_range = dataset.rating_range;
  split.train.interactions.assign(sorted.begin(), sorted.begin() + train_end);
  split.validation.interactions.assign(sorted.begin() + train_end, sorted.begin() + val_end);
  split.test.interactions.assign(sorted.begin() + val_end, sorted.end());
  split.train_end = split.train.empty() ? sorted.front().timestamp
                                        : split.train.interactions.back().timestamp;
  split.val_end = split.validation.empty() ? split.train_end
                                           : split.validation.interactions.back().timestamp;
  return split;
}

SplitResult remove_cold_start(const SplitResult& split) {
  std::unordered_set<std::string_view> users;
  std::unordered_set<std::string_view> items;
  for (const auto& interaction : split.train.interactions) {
    users.insert(interaction.user_id);
    items.insert(interaction.item_id);
  }
  auto prune = [&](const Dataset& in) {
    Dataset out;
    out.rating_range = in.rating_range;
    for (const auto& interaction : in.interactions) {
      if (users.count(interaction.user_id) && items.count(interaction.item_id)) {
        out.interactions.push_back(interaction);
      }
    }
    return out;
  };
  SplitResult out;
  out.train = split.train;
  out.validation = prune(split.validation);
  out.test = prune(split.test);
  out.train_end = split.train_end;
  out.val_end = split.val_end;
  return out;
}

Dataset merge_train_val(const SplitResult& split) {
  Dataset merged;
  merged.rating_range = split.train.rating_range;
  merged.interactions = split.train.interactions;
  merged.interactions.insert(merged.interactions.end(), split.validation.interactions.begin(),
                             split.validation.interactions.end());
  sort_chronologically(merged.interactions);
  return merged;
}

Dataset clean(const Dataset& dataset, const std::optional<RatingRange>& range, int k) {
  return kcore_filter(binarize(dedupe(dataset), range), k);
}

DatasetSummary summarize(const Dataset& dataset) {
  DatasetSummary summary;
  std::unordered_set<std::string_view> users;
  std::unordered_set<std::string_view> items;
  for (const auto& interaction : dataset.interactions) {
    users.insert(interaction.user_id);
    items.insert(interaction.item_id);
  }
  summary.users = users.size();
  summary.items = items.size();
  summary.interactions = dataset.size();
  if (!dataset.empty()) {
    auto [lo, hi] = std::minmax_element(
        dataset.interactions.begin(), dataset.interactions.end(),
        [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    summary.first_timestamp = lo->timestamp;
    summary.last_timestamp = hi->timestamp;
  }
  return summary;
}

void write_interactions(std::ostream& out, const Dataset& dataset, char delimiter) {
  const bool with_rating =
      std::any_of(dataset.interactions.begin(), dataset.interactions.end(),
                  [](const Interaction& i) { return i.rating.has_value(); });
  out << "user" << delimiter << "item" << delimiter << "timestamp";
  if (with_rating) {
    out << delimiter << "rating";
  }
  out << '\n';
  for (const auto& interaction : dataset.interactions) {
    out << interaction.user_id << delimiter << interaction.item_id << delimiter
        << interaction.timestamp;
    if (with_rating) {
      out << delimiter << (interaction.rating ? text::format_double(*interaction.rating) : "");
    }
    out << '\n';
  }
}

void write_interactions_file(const std::string& path, const Dataset& dataset, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCategory::kIo, "cannot write " + path);
  }
  write_interactions(out, dataset, delimiter);
  if (!out) {
    throw Error(ErrorCategory::kIo, "write failed for " + path);
  }
}

ColumnMapping canonical_mapping(bool with_rating, char delimiter) {
  ColumnMapping mapping;
  mapping.delimiter = delimiter;
  mapping.has_header = true;
  if (with_rating) {
    mapping.rating_column = "rating";
  }
  return mapping;
}

void write_summary(std::ostream& out, const DatasetSummary& summary) {
  const double span_days =
      static_cast<double>(summary.last_timestamp - summary.first_timestamp) / 86400.0;
  out << "users=" << summary.users << '\n'
      << "items=" << summary.items << '\n'
      << "interactions=" << summary.interactions << '\n'
      << "first_timestamp=" << summary.first_timestamp << '\n'
      << "last_timestamp=" << summary.last_timestamp << '\n'
      << "timespan_days=" << text::format_double(span_days) << '\n';
}

}  // namespace tai2vec::corpus
