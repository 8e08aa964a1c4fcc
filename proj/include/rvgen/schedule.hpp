#pragma once

#include <string>

#include "rvgen/errors.hpp"

namespace rvgen {

enum class ScheduleKind { kCosine };

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

// Variance-preserving noise schedule on continuous time t in [0,1]:
// alpha^2 + sigma^2 = 1, alpha monotone decreasing, alpha_0 ~ 1, alpha_1 ~ 0.
// Cosine form alpha = cos(pi t / 2) with alpha clamped to
// [1e-4, 1 - 1e-4] and sigma recomputed so the identity stays exact.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kCosine;

  double alpha(double t) const;
  double sigma(double t) const;

  static constexpr double kAlphaMin = 1e-4;
  static constexpr double kAlphaMax = 1.0 - 1e-4;
};

}  // namespace rvgen
