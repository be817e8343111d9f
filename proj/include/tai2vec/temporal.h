/**
 * @file temporal.h
 * @brief Per-user inter-arrival statistics, adaptive session thresholds and
 *        cumulative/normalized timelines
 */

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tai2vec::temporal {

using ItemIndex = uint32_t;

struct TimelineEvent {
  ItemIndex item = 0;
  int64_t timestamp = 0;

  bool operator==(const TimelineEvent&) const = default;
};

/// One user's events ordered by (timestamp, item).
struct UserTimeline {
  std::string user_id;
  std::vector<TimelineEvent> events;
};

enum class QuartileMethod { kLinearInterpolation };

struct TemporalConfig {
  double t_min = 300.0;
  double lambda = 1.5;
  double epsilon = 1e-6;
  double clip_factor = 1.5;
  QuartileMethod quartile_method = QuartileMethod::kLinearInterpolation;
  // Sum clipped gaps into t_cum; false sums the raw gaps.
  bool clip_cumulative = true;
  // When set, every user is segmented at this global threshold instead of
  // their own IQR threshold.
  std::optional<double> fixed_tau;

  void validate() const;
};

inline constexpr double kNoBreak = std::numeric_limits<double>::infinity();

/// Minimum number of valid intervals for quartile statistics.
inline constexpr size_t kMinValidIntervals = 4;

struct UserTemporalProfile {
  std::vector<double> valid_intervals;
  std::optional<double> q1;
  std::optional<double> q3;
  double tau = kNoBreak;
  std::optional<double> mu;
  std::optional<double> sigma;
  double clip_bound = kNoBreak;
  std::vector<double> t_cum;
  std::vector<double> t_norm;
  std::vector<int> session_of;
  bool degenerate = true;

  int session_count() const { return session_of.empty() ? 0 : session_of.back() + 1; }
};

/// Consecutive gaps strictly greater than `t_min`.
std::vector<double> valid_intervals(const UserTimeline& timeline, double t_min);

/// Quantile `p` of `values` by linear interpolation between order statistics
/// (position p * (n - 1) in the sorted sequence).
double quantile(std::span<const double> values, double p,
                QuartileMethod method = QuartileMethod::kLinearInterpolation);

/// Q3 + lambda * (Q3 - Q1). Throws for fewer than kMinValidIntervals values.
double session_threshold(std::span<const double> intervals, double lambda,
                         QuartileMethod method = QuartileMethod::kLinearInterpolation);

/// Session label per event; a raw gap strictly above `tau` opens a new session.
std::vector<int> segment_sessions(const UserTimeline& timeline, double tau);

UserTemporalProfile user_profile(const UserTimeline& timeline, const TemporalConfig& config);

}  // namespace tai2vec::temporal
