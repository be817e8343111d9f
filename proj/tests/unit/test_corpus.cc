/**
 * @file test_corpus.cc
 * @brief Loading, cleaning and temporal splitting of interaction logs
 */

#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tai2vec/corpus.h"
#include "tai2vec/error.h"
#include "test_support.h"

using namespace tai2vec;
using namespace tai2vec::corpus;
using tai2vec::fixtures::dataset;
using tai2vec::fixtures::row;

namespace {

std::vector<int64_t> timestamps(const Dataset& d) {
  std::vector<int64_t> out;
  for (const auto& r : d.interactions) out.push_back(r.timestamp);
  return out;
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCategory::kUsage;
}

}  // namespace

TEST(Load, WellFormedRowsInTimestampOrder) {
  std::istringstream in("user,item,timestamp\nu1,a,30\nu2,b,10\nu1,c,20\n");
  auto result = load_interactions(in, ColumnMapping{});
  ASSERT_EQ(result.dataset.size(), 3u);
  EXPECT_EQ(timestamps(result.dataset), (std::vector<int64_t>{10, 20, 30}));
  EXPECT_EQ(result.skipped_rows, 0u);
  EXPECT_EQ(result.dataset.interactions[0].item_id, "b");
}

TEST(Load, NonNumericTimestampRowIsSkipped) {
  std::istringstream in("user,item,timestamp\nu,a,1\nu,b,2\nu,c,yesterday\nu,d,4\nu,e,5\n");
  auto result = load_interactions(in, ColumnMapping{});
  EXPECT_EQ(result.dataset.size(), 4u);
  EXPECT_EQ(result.skipped_rows, 1u);
}

TEST(Load, ColumnsByIndexWithoutHeaderAndScale) {
  ColumnMapping m;
  m.delimiter = '\t';
  m.has_header = false;
  m.user_column = "0";
  m.item_column = "1";
  m.rating_column = "2";
  m.timestamp_column = "3";
  m.timestamp_scale = 0.001;
  std::istringstream in("7\t42\t4\t5000\n8\t43\t2\t3000\n");
  auto result = load_interactions(in, m);
  ASSERT_EQ(result.dataset.size(), 2u);
  EXPECT_EQ(result.dataset.interactions[0].user_id, "8");
  EXPECT_EQ(result.dataset.interactions[0].timestamp, 3);
  EXPECT_EQ(result.dataset.interactions[1].rating, 4.0);
}

TEST(Load, NamedColumnsInAnyOrder) {
  ColumnMapping m;
  m.user_column = "uid";
  m.item_column = "movie";
  m.timestamp_column = "when";
  std::istringstream in("when,movie,uid\n5,m1,alice\n");
  auto result = load_interactions(in, m);
  ASSERT_EQ(result.dataset.size(), 1u);
  EXPECT_EQ(result.dataset.interactions[0].user_id, "alice");
  EXPECT_EQ(result.dataset.interactions[0].item_id, "m1");
}

TEST(Load, Errors) {
  EXPECT_EQ(category_of([] {
              std::istringstream in("user,item,timestamp\nu,a,x\nu,b,y\n");
              load_interactions(in, ColumnMapping{});
            }),
            ErrorCategory::kData);
  EXPECT_EQ(category_of([] { load_interactions_file("/nonexistent/file.csv", ColumnMapping{}); }),
            ErrorCategory::kIo);
  EXPECT_EQ(category_of([] {
              std::istringstream in("user,item,timestamp\n");
              load_interactions(in, ColumnMapping{});
            }),
            ErrorCategory::kData);
}

TEST(Binarize, StrictlyAboveMidpoint) {
  Dataset d;
  for (int r = 1; r <= 5; ++r) d.interactions.push_back(row("u", "i" + std::to_string(r), r, r));
  auto out = binarize(d, RatingRange{1, 5});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.interactions[0].rating, 4.0);
  EXPECT_EQ(out.interactions[1].rating, 5.0);
}

TEST(Binarize, ImplicitDatasetIsUntouched) {
  auto d = dataset({row("u", "a", 1), row("u", "b", 2)});
  EXPECT_EQ(binarize(d, std::nullopt), d);
}

TEST(Binarize, AllAtMidpointGivesEmpty) {
  auto d = dataset({row("u", "a", 1, 3.0), row("v", "b", 2, 3.0)});
  EXPECT_TRUE(binarize(d, RatingRange{1, 5}).empty());
}

TEST(Binarize, MissingRatingWithRangeIsDataError) {
  auto d = dataset({row("u", "a", 1)});
  EXPECT_EQ(category_of([&] { binarize(d, RatingRange{1, 5}); }), ErrorCategory::kData);
}

TEST(Dedupe, EarliestWins) {
  auto out = dedupe(dataset({row("u", "a", 20), row("u", "a", 10)}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.interactions[0].timestamp, 10);
}

TEST(Dedupe, DistinctAndEmpty) {
  auto d = dataset({row("u", "a", 1), row("u", "b", 2), row("v", "a", 3)});
  EXPECT_EQ(dedupe(d), d);
  EXPECT_TRUE(dedupe(Dataset{}).empty());
}

TEST(Dedupe, MatchesGroupByOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d;
    std::uniform_int_distribution<int> small(0, 3);
    std::uniform_int_distribution<int64_t> time(0, 50);
    for (int n = 0; n < 30; ++n) {
      d.interactions.push_back(row("u" + std::to_string(small(rng)), "i" + std::to_string(small(rng)),
                                   time(rng)));
    }
    std::map<std::pair<std::string, std::string>, int64_t> earliest;
    for (const auto& r : d.interactions) {
      auto key = std::make_pair(r.user_id, r.item_id);
      auto it = earliest.find(key);
      if (it == earliest.end() || r.timestamp < it->second) earliest[key] = r.timestamp;
    }
    auto out = dedupe(d);
    ASSERT_EQ(out.size(), earliest.size());
    for (const auto& r : out.interactions) {
      EXPECT_EQ(r.timestamp, earliest.at({r.user_id, r.item_id}));
    }
  }
}

TEST(KCore, IdentityWhenEveryoneQualifies) {
  Dataset d;
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 5; ++i) d.interactions.push_back(row("u" + std::to_string(u), "i" + std::to_string(i), u * 5 + i));
  EXPECT_EQ(kcore_filter(d, 5), d);
}

TEST(KCore, StarGraphVanishes) {
  auto d = dataset({row("u1", "x", 1), row("u2", "x", 2), row("u3", "x", 3), row("u4", "x", 4)});
  EXPECT_TRUE(kcore_filter(d, 5).empty());
}

TEST(KCore, CascadingRemovalMatchesOracle) {
  auto d = dataset({row("u1", "a", 1), row("u1", "b", 2), row("u1", "c", 3), row("u2", "a", 4),
                    row("u2", "d", 5), row("u3", "d", 6), row("u3", "e", 7), row("u4", "b", 8),
                    row("u4", "c", 9), row("u4", "e", 10)});
  auto out = kcore_filter(d, 2);
  std::multiset<std::pair<std::string, std::string>> got;
  for (const auto& r : out.interactions) got.emplace(r.user_id, r.item_id);
  EXPECT_EQ(got, fixtures::brute_kcore(d, 2));
}

TEST(KCore, RandomInstancesMatchOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto d = fixtures::random_bipartite(rng, 8, 8, 40);
    for (int k : {2, 3, 5}) {
      auto out = kcore_filter(d, k);
      std::multiset<std::pair<std::string, std::string>> got;
      for (const auto& r : out.interactions) got.emplace(r.user_id, r.item_id);
      ASSERT_EQ(got, fixtures::brute_kcore(d, k)) << "trial " << trial << " k " << k;
    }
  }
}

TEST(Split, TenInteractions) {
  Dataset d;
  for (int t = 0; t < 10; ++t) d.interactions.push_back(row("u", "i" + std::to_string(t), t));
  auto s = temporal_split(d);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, SevenInteractions) {
  Dataset d;
  for (int t = 0; t < 7; ++t) d.interactions.push_back(row("u", "i" + std::to_string(t), t));
  auto s = temporal_split(d);
  EXPECT_EQ(s.train.size(), 5u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), 7u);
}

TEST(Split, IdenticalTimestampsUseStableOrder) {
  Dataset d;
  for (int n = 0; n < 10; ++n) d.interactions.push_back(row("u" + std::to_string(n), "i", 100));
  auto s = temporal_split(d);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.interactions[0].user_id, "u8");
  EXPECT_EQ(s.test.interactions[0].user_id, "u9");
}

TEST(Split, BoundaryOrderingOnRandomInstances) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto d = fixtures::random_bipartite(rng, 10, 10, 60);
    if (d.size() < 3) continue;
    auto s = temporal_split(d);
    ASSERT_EQ(s.train.size() + s.validation.size() + s.test.size(), d.size());
    for (const auto& r : s.train.interactions) {
      for (const auto& v : s.validation.interactions) ASSERT_LE(r.timestamp, v.timestamp);
      for (const auto& t : s.test.interactions) ASSERT_LE(r.timestamp, t.timestamp);
    }
    for (const auto& v : s.validation.interactions)
      for (const auto& t : s.test.interactions) ASSERT_LE(v.timestamp, t.timestamp);
  }
}

TEST(Split, RejectsTinyInputAndBadRatios) {
  EXPECT_EQ(category_of([] { temporal_split(dataset({row("u", "a", 1), row("u", "b", 2)})); }),
            ErrorCategory::kData);
  auto d = dataset({row("u", "a", 1), row("u", "b", 2), row("u", "c", 3)});
  EXPECT_EQ(category_of([&] { temporal_split(d, 0.5, 0.5, 0.5); }), ErrorCategory::kUsage);
}

TEST(ColdStart, FourPresenceCases) {
  SplitResult s;
  s.train = dataset({row("known", "seen", 1)});
  s.test = dataset({row("known", "seen", 5), row("known", "new", 6), row("stranger", "seen", 7),
                    row("stranger", "new", 8)});
  auto out = remove_cold_start(s);
  ASSERT_EQ(out.test.size(), 1u);
  EXPECT_EQ(out.test.interactions[0].item_id, "seen");
  EXPECT_EQ(out.test.interactions[0].user_id, "known");
}

TEST(ColdStart, IdentityWhenAllKnown) {
  SplitResult s;
  s.train = dataset({row("u", "a", 1), row("v", "b", 2)});
  s.validation = dataset({row("u", "b", 3)});
  s.test = dataset({row("v", "a", 4)});
  auto out = remove_cold_start(s);
  EXPECT_EQ(out.validation, s.validation);
  EXPECT_EQ(out.test, s.test);
}

TEST(Merge, SortedUnion) {
  SplitResult s;
  for (int t = 0; t < 8; ++t) s.train.interactions.push_back(row("u", "i" + std::to_string(t), t));
  s.validation = dataset({row("v", "x", 8)});
  auto merged = merge_train_val(s);
  EXPECT_EQ(merged.size(), 9u);
  EXPECT_TRUE(std::is_sorted(merged.interactions.begin(), merged.interactions.end(),
                             chronological_less));
  s.validation = {};
  EXPECT_EQ(merge_train_val(s).interactions, s.train.interactions);
}

TEST(Merge, OverlappingTimestampsKeepOrder) {
  SplitResult s;
  s.train = dataset({row("a", "x", 5), row("b", "x", 5)});
  s.validation = dataset({row("a", "y", 5)});
  auto merged = merge_train_val(s);
  ASSERT_EQ(merged.size(), 3u);
  EXPECT_EQ(merged.interactions[0].item_id, "x");
  EXPECT_EQ(merged.interactions[1].item_id, "y");
  EXPECT_EQ(merged.interactions[2].user_id, "b");
}

TEST(RoundTrip, WriteThenLoadCanonical) {
  auto d = dataset({row("u1", "a", 1, 4.0), row("u2", "b", 2, 5.0)});
  std::ostringstream out;
  write_interactions(out, d);
  std::istringstream in(out.str());
  auto loaded = load_interactions(in, canonical_mapping(true));
  EXPECT_EQ(loaded.dataset.interactions, d.interactions);
}

TEST(Summary, CountsAndSpan) {
  auto d = dataset({row("u", "a", 0), row("v", "a", 86400), row("v", "b", 172800)});
  auto s = summarize(d);
  EXPECT_EQ(s.users, 2u);
  EXPECT_EQ(s.items, 2u);
  EXPECT_EQ(s.interactions, 3u);
  EXPECT_EQ(s.first_timestamp, 0);
  EXPECT_EQ(s.last_timestamp, 172800);
}
