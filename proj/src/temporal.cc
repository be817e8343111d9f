/**
 * @file temporal.cc
 * @brief Per-user temporal statistics
 */

#include "tai2vec/temporal.h"

#include <algorithm>
#include <cmath>

#include "tai2vec/error.h"

namespace tai2vec::temporal {

void TemporalConfig::validate() const {
  if (!(t_min >= 0.0)) {
    throw Error(ErrorCategory::kUsage, "temporal.t_min must be >= 0");
  }
  if (!(lambda > 0.0)) {
    throw Error(ErrorCategory::kUsage, "temporal.lambda must be > 0");
  }
  if (!(epsilon > 0.0)) {
    throw Error(ErrorCategory::kUsage, "temporal.epsilon must be > 0");
  }
  if (!(clip_factor > 0.0)) {
    throw Error(ErrorCategory::kUsage, "temporal.clip_factor must be > 0");
  }
  if (fixed_tau && !(*fixed_tau > 0.0)) {
    throw Error(ErrorCategory::kUsage, "fixed session threshold must be > 0");
  }
}

std::vector<double> valid_intervals(const UserTimeline& timeline, double t_min) {
  std::vector<double> intervals;
  for (size_t k = 1; k < timeline.events.size(); ++k) {
    auto gap = static_cast<double>(timeline.events[k].timestamp - timeline.events[k - 1].timestamp);
    if (gap > t_min) {
      intervals.push_back(gap);
    }
  }
  return intervals;
}

double quantile(std::span<const double> values, double p, QuartileMethod /*method*/) {
  if (values.empty()) {
    throw Error(ErrorCategory::kData, "quantile of an empty sequence");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double position = p * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<size_t>(std::floor(position));
  const size_t upper = std::min(lower + 1, sorted.size() - 1);
  const double fraction = position - static_cast<double>(lower);
  return sorted[lower] + fraction * (sorted[upper] - sorted[lower]);
}

double session_threshold(std::span<const double> intervals, double lambda,
                         QuartileMethod method) {
  if (intervals.size() < kMinValidIntervals) {
    throw Error(ErrorCategory::kData, "degenerate profile: fewer than 4 valid intervals");
  }
  const double q1 = quantile(intervals, 0.25, method);
  const double q3 = quantile(intervals, 0.75, method);
  return q3 + lambda * (q3 - q1);
}

std::vector<int> segment_sessions(const UserTimeline& timeline, double tau) {
  std::vector<int> sessions;
  sessions.reserve(timeline.events.size());
  int current = 0;
  for (size_t k = 0; k < timeline.events.size(); ++k) {
    if (k > 0) {
      auto gap =
          static_cast<double>(timeline.events[k].timestamp - timeline.events[k - 1].timestamp);
      if (gap > tau) {
        ++current;
      }
    }
    sessions.push_back(current);
  }
  return sessions;
}

UserTemporalProfile user_profile(const UserTimeline& timeline, const TemporalConfig& config) {
  if (timeline.events.empty()) {
    throw Error(ErrorCategory::kData, "empty timeline for user " + timeline.user_id);
  }
  UserTemporalProfile profile;
  profile.valid_intervals = valid_intervals(timeline, config.t_min);
  profile.degenerate = profile.valid_intervals.size() < kMinValidIntervals;

  if (!profile.degenerate) {
    const auto& intervals = profile.valid_intervals;
    profile.q1 = quantile(intervals, 0.25, config.quartile_method);
    profile.q3 = quantile(intervals, 0.75, config.quartile_method);
    const double iqr = *profile.q3 - *profile.q1;
    profile.tau = *profile.q3 + config.lambda * iqr;
    profile.clip_bound = *profile.q3 + config.clip_factor * iqr;

    double sum = 0.0;
    for (double interval : intervals) {
      sum += std::min(interval, profile.clip_bound);
    }
    const double mean = sum / static_cast<double>(intervals.size());
    double squares = 0.0;
    for (double interval : intervals) {
      const double diff = std::min(interval, profile.clip_bound) - mean;
      squares += diff * diff;
    }
    profile.mu = mean;
    profile.sigma = std::sqrt(squares / static_cast<double>(intervals.size()));
  }
  if (config.fixed_tau) {
    profile.tau = *config.fixed_tau;
  }

  const auto& events = timeline.events;
  const double cumulative_cap = config.clip_cumulative ? profile.clip_bound : kNoBreak;
  profile.t_cum.reserve(events.size());
  profile.t_norm.reserve(events.size());
  double running = 0.0;
  const int64_t first = events.front().timestamp;
  const int64_t last = events.back().timestamp;
  for (size_t k = 0; k < events.size(); ++k) {
    if (k > 0) {
      auto gap = static_cast<double>(events[k].timestamp - events[k - 1].timestamp);
      running += std::min(gap, cumulative_cap);
    }
    profile.t_cum.push_back(running);
    profile.t_norm.push_back(last > first ? static_cast<double>(events[k].timestamp - first) /
                                                static_cast<double>(last - first)
                                          : 0.0);
  }
  profile.session_of = segment_sessions(timeline, profile.tau);
  return profile;
}

}  // namespace tai2vec::temporal
