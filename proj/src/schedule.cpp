#include "rvgen/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rvgen {

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "cosine") return ScheduleKind::kCosine;
  throw UsageError("unknown noise schedule: '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kCosine:
      return "cosine";
  }
  throw UsageError("unknown schedule kind");
}

double NoiseSchedule::alpha(double t) const {
  if (t < 0.0 || t > 1.0)
    throw UsageError("schedule: t must lie in [0,1], got " + std::to_string(t));
  double a = std::cos(M_PI * t / 2.0);
  return std::clamp(a, kAlphaMin, kAlphaMax);
}

double NoiseSchedule::sigma(double t) const {
  double a = alpha(t);
  return std::sqrt(1.0 - a * a);
}

}  // namespace rvgen
