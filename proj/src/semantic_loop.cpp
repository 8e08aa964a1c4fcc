#include "rvgen/semantic_loop.hpp"

#include <string>

#include "rvgen/errors.hpp"

namespace rvgen {

EmaTrace::EmaTrace(int height, int width, int num_classes, double alpha)
    : probs_(height, width, num_classes, 0.0), alpha_(alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw UsageError("EmaTrace: alpha must lie in [0,1], got " +
                     std::to_string(alpha));
}

void EmaTrace::update(const Grid& probs) {
  if (!probs.same_shape(probs_))
    throw UsageError("EmaTrace::update: probability grid shape mismatch");
  if (!initialized_) {
    probs_ = probs;  // first observation is adopted verbatim
    initialized_ = true;
    return;
  }
  for (std::size_t i = 0; i < probs_.data.size(); ++i)
    probs_.data[i] = alpha_ * probs.data[i] + (1.0 - alpha_) * probs_.data[i];
}

const Grid& EmaTrace::probs() const {
  if (!initialized_)
    throw UsageError("EmaTrace::probs: trace has not been initialized");
  return probs_;
}

double confidence_fraction(const EmaTrace& trace, double delta) {
  const Grid& p = trace.probs();  // throws if uninitialized
  std::size_t confident = 0;
  std::size_t pixels = static_cast<std::size_t>(p.height) * p.width;
  for (int r = 0; r < p.height; ++r)
    for (int c = 0; c < p.width; ++c) {
      double mx = p.at(r, c, 0);
      for (int ch = 1; ch < p.channels; ++ch)
        if (p.at(r, c, ch) > mx) mx = p.at(r, c, ch);
      if (mx > delta) ++confident;
    }
  return static_cast<double>(confident) / static_cast<double>(pixels);
}

void validate(const LoopConfig& config) {
  if (!(config.delta > 0.0) || !(config.delta < 1.0))
    throw UsageError("loop config: delta must lie in (0,1)");
  if (config.alpha < 0.0 || config.alpha > 1.0)
    throw UsageError("loop config: alpha must lie in [0,1]");
}

StepMode controller_step(ControllerState& state, const EmaTrace& trace,
                         const LoopConfig& config) {
  if (!config.closed_loop) return StepMode::kUnconditional;
  if (state.triggered) {
    StepMode mode = state.next_mode;
    state.next_mode = mode == StepMode::kConditional ? StepMode::kUnconditional
                                                     : StepMode::kConditional;
    return mode;
  }
  if (!trace.initialized()) return StepMode::kUnconditional;
  if (confidence_fraction(trace, config.delta) > config.delta) {
    state.triggered = true;
    state.next_mode = StepMode::kUnconditional;  // alternation after this C
    return StepMode::kConditional;
  }
  return StepMode::kUnconditional;
}

}  // namespace rvgen
