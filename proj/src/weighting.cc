/**
 * @file weighting.cc
 * @brief Pair weight regimes
 */

#include "tai2vec/weighting.h"

#include <algorithm>
#include <cmath>

#include "tai2vec/error.h"

namespace tai2vec::weighting {

std::string_view mode_name(WeightMode mode) {
  switch (mode) {
    case WeightMode::kUniform:
      return "uniform";
    case WeightMode::kDisc:
      return "disc";
    case WeightMode::kCont:
      return "cont";
    case WeightMode::kFixedThreshold:
      return "fixed_threshold";
  }
  return "uniform";
}

WeightMode parse_mode(std::string_view name) {
  if (name == "uniform" || name == "item2vec") return WeightMode::kUniform;
  if (name == "disc") return WeightMode::kDisc;
  if (name == "cont") return WeightMode::kCont;
  if (name == "fixed_threshold" || name == "fixed") return WeightMode::kFixedThreshold;
  throw Error(ErrorCategory::kUsage, "unknown weighting mode '" + std::string(name) + "'");
}

void WeightConfig::validate() const {
  switch (mode) {
    case WeightMode::kUniform:
      break;
    case WeightMode::kDisc:
      if (!(lambda > 0.0)) {
        throw Error(ErrorCategory::kUsage, "weighting.lambda must be > 0");
      }
      break;
    case WeightMode::kCont:
      if (!(alpha >= 1.0)) {
        throw Error(ErrorCategory::kUsage, "weighting.alpha must be >= 1");
      }
      if (!(w_min > 0.0 && w_min < 1.0)) {
        throw Error(ErrorCategory::kUsage, "weighting.w_min must lie in (0, 1)");
      }
      break;
    case WeightMode::kFixedThreshold:
      if (!(fixed_tau > 0.0)) {
        throw Error(ErrorCategory::kUsage, "weighting.fixed_tau must be > 0");
      }
      break;
  }
}

temporal::TemporalConfig temporal_config_for(const temporal::TemporalConfig& base,
                                             const WeightConfig& weights) {
  temporal::TemporalConfig config = base;
  config.fixed_tau.reset();
  if (weights.mode == WeightMode::kDisc) {
    config.lambda = weights.lambda;
  } else if (weights.mode == WeightMode::kFixedThreshold) {
    config.fixed_tau = weights.fixed_tau;
  }
  return config;
}

double disc_weight(size_t i, size_t j, std::span<const int> sessions) {
  return sessions[i] == sessions[j] ? 2.0 : 1.0;
}

double z_score(double distance, double mu, double sigma, double epsilon) {
  return std::max(0.0, (distance - mu) / (sigma + epsilon));
}

double local_weight(double z, double alpha, double w_min) {
  if (std::isinf(z)) {
    return w_min;
  }
  const double ratio = z / (z + 1.0);
  return std::max(w_min, 1.0 - std::pow(ratio, alpha));
}

double global_weight(double tn_i, double tn_j, double w_min) {
  return 1.0 - (1.0 - w_min) * std::abs(tn_i - tn_j);
}

CurvePoint cont_components(const temporal::UserTemporalProfile& profile, size_t i, size_t j,
                           const WeightConfig& config, double epsilon) {
  CurvePoint point;
  point.global = global_weight(profile.t_norm[i], profile.t_norm[j], config.w_min);
  if (profile.degenerate || !profile.mu || !profile.sigma) {
    point.local = point.global;
    point.unified = point.global;
    return point;
  }
  const double distance = std::abs(profile.t_cum[i] - profile.t_cum[j]);
  const double z = z_score(distance, *profile.mu, *profile.sigma, epsilon);
  point.local = local_weight(z, config.alpha, config.w_min);
  point.has_local = true;
  point.unified = unified_weight(point.local, point.global);
  return point;
}

double pair_weight(const temporal::UserTemporalProfile& profile, size_t i, size_t j,
                   const WeightConfig& config, double epsilon) {
  switch (config.mode) {
    case WeightMode::kUniform:
      return 1.0;
    case WeightMode::kDisc:
      if (profile.degenerate) {
        return 1.0;
      }
      return disc_weight(i, j, profile.session_of);
    case WeightMode::kFixedThreshold:
      return disc_weight(i, j, profile.session_of);
    case WeightMode::kCont:
      return cont_components(profile, i, j, config, epsilon).unified;
  }
  return 1.0;
}

}  // namespace tai2vec::weighting
