/**
 * @file weighting.h
 * @brief Pair weights for the skip-gram loss under each temporal regime
 *
 * uniform          every pair weighs 1 (plain Item2Vec)
 * disc             2 inside a user-adaptive session, 1 across sessions
 * cont             mean of a z-score rational decay and a timeline-position
 *                  linear decay
 * fixed_threshold  disc weights over sessions cut at one global threshold
 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "tai2vec/temporal.h"

namespace tai2vec::weighting {

enum class WeightMode { kUniform, kDisc, kCont, kFixedThreshold };

std::string_view mode_name(WeightMode mode);
WeightMode parse_mode(std::string_view name);

struct WeightConfig {
  WeightMode mode = WeightMode::kUniform;
  double lambda = 1.5;      // disc
  double alpha = 3.0;       // cont
  double w_min = 0.3;       // cont
  double fixed_tau = 1800;  // fixed_threshold, seconds

  void validate() const;
};

/// Temporal settings a profile must be built with for `weights` to apply.
temporal::TemporalConfig temporal_config_for(const temporal::TemporalConfig& base,
                                             const WeightConfig& weights);

double disc_weight(size_t i, size_t j, std::span<const int> sessions);

/// max(0, (d - mu) / (sigma + epsilon)).
double z_score(double distance, double mu, double sigma, double epsilon);

/// max(w_min, 1 - (z / (z + 1))^alpha).
double local_weight(double z, double alpha, double w_min);

/// 1 - (1 - w_min) * |tn_i - tn_j|.
double global_weight(double tn_i, double tn_j, double w_min);

inline double unified_weight(double local, double global) { return (local + global) / 2.0; }

struct CurvePoint {
  double local = 0.0;  // unavailable on degenerate profiles (reported as global)
  double global = 0.0;
  double unified = 0.0;
  bool has_local = false;
};

/// Components of the continuous weight for positions i and j.
CurvePoint cont_components(const temporal::UserTemporalProfile& profile, size_t i, size_t j,
                           const WeightConfig& config, double epsilon);

double pair_weight(const temporal::UserTemporalProfile& profile, size_t i, size_t j,
                   const WeightConfig& config, double epsilon);

}  // namespace tai2vec::weighting
