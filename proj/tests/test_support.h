/**
 * @file test_support.h
 * @brief Fixtures and brute-force reference implementations shared by tests
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tai2vec/corpus.h"
#include "tai2vec/temporal.h"

namespace tai2vec::fixtures {

inline corpus::Interaction row(std::string user, std::string item, int64_t ts,
                               std::optional<double> rating = std::nullopt) {
  return {std::move(user), std::move(item), ts, rating};
}

inline corpus::Dataset dataset(std::vector<corpus::Interaction> rows) {
  corpus::Dataset d;
  d.interactions = std::move(rows);
  return d;
}

inline temporal::UserTimeline timeline(const std::vector<int64_t>& timestamps) {
  temporal::UserTimeline t;
  t.user_id = "u";
  for (size_t i = 0; i < timestamps.size(); ++i) {
    t.events.push_back({static_cast<temporal::ItemIndex>(i), timestamps[i]});
  }
  return t;
}

/// Random bipartite log with distinct (user, item) pairs.
inline corpus::Dataset random_bipartite(std::mt19937_64& rng, int users, int items, int edges) {
  std::set<std::pair<int, int>> seen;
  corpus::Dataset d;
  std::uniform_int_distribution<int> pick_user(0, users - 1);
  std::uniform_int_distribution<int> pick_item(0, items - 1);
  std::uniform_int_distribution<int64_t> pick_time(0, 1000);
  for (int e = 0; e < edges; ++e) {
    const int u = pick_user(rng);
    const int i = pick_item(rng);
    if (!seen.insert({u, i}).second) continue;
    d.interactions.push_back(row("u" + std::to_string(u), "i" + std::to_string(i), pick_time(rng)));
  }
  return d;
}

/// k-core by deleting one under-connected user or item at a time.
inline std::multiset<std::pair<std::string, std::string>> brute_kcore(const corpus::Dataset& d,
                                                                      int k) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& r : d.interactions) edges.emplace_back(r.user_id, r.item_id);
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, int> user_degree;
    std::map<std::string, int> item_degree;
    for (const auto& [u, i] : edges) {
      ++user_degree[u];
      ++item_degree[i];
    }
    for (const auto& [u, degree] : user_degree) {
      if (degree < k) {
        std::erase_if(edges, [&](const auto& e) { return e.first == u; });
        changed = true;
        break;
      }
    }
    if (changed) continue;
    for (const auto& [i, degree] : item_degree) {
      if (degree < k) {
        std::erase_if(edges, [&](const auto& e) { return e.second == i; });
        changed = true;
        break;
      }
    }
  }
  return {edges.begin(), edges.end()};
}

/// Session labels by scanning gaps one at a time.
inline std::vector<int> brute_sessions(const std::vector<int64_t>& timestamps, double tau) {
  std::vector<int> labels;
  int current = 0;
  for (size_t k = 0; k < timestamps.size(); ++k) {
    if (k > 0) {
      const double gap = static_cast<double>(timestamps[k] - timestamps[k - 1]);
      if (gap > tau) ++current;
    }
    labels.push_back(current);
  }
  return labels;
}

/// Quantile by the (n - 1) p interpolation rule, written independently.
inline double brute_quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const double lo = std::floor(h);
  const double hi = std::ceil(h);
  const double a = values[static_cast<size_t>(lo)];
  const double b = values[static_cast<size_t>(hi)];
  return a + (h - lo) * (b - a);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tai2vec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Dense synthetic rating log that survives 5-core filtering.
inline corpus::Dataset synthetic_log(int users = 40, int items = 30, int per_user = 14,
                                     uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> gap(8.0, 2.0);
  corpus::Dataset d;
  for (int u = 0; u < users; ++u) {
    int64_t t = 1000000 + static_cast<int64_t>(rng() % 100000);
    std::set<int> used;
    for (int k = 0; k < per_user; ++k) {
      int item = static_cast<int>((u + k * (1 + u % 5) + rng() % 3) % items);
      while (used.count(item)) item = (item + 1) % items;
      used.insert(item);
      t += 1 + static_cast<int64_t>(gap(rng));
      d.interactions.push_back(row("u" + std::to_string(u), "m" + std::to_string(item), t,
                                   rng() % 5 == 0 ? 2.0 : 4.0 + static_cast<double>(rng() % 2)));
    }
  }
  return d;
}

}  // namespace tai2vec::fixtures
