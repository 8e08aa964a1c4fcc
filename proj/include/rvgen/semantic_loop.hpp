#pragma once

#include "rvgen/grid.hpp"

namespace rvgen {

// Exponential-moving-average aggregate of per-step semantic predictions.
// The first observation initializes the trace verbatim; later observations
// fold in as alpha*new + (1-alpha)*old. alpha = 1 tracks only the newest
// prediction; alpha = 0 freezes the initialization.
class EmaTrace {
 public:
  EmaTrace(int height, int width, int num_classes, double alpha);

  void update(const Grid& probs);  // H x W x C per-pixel probabilities
  bool initialized() const { return initialized_; }
  const Grid& probs() const;
  double alpha() const { return alpha_; }

 private:
  Grid probs_;
  double alpha_;
  bool initialized_ = false;
};

// Fraction of pixels whose max class probability STRICTLY exceeds delta.
double confidence_fraction(const EmaTrace& trace, double delta);

enum class StepMode { kUnconditional, kConditional };

struct LoopConfig {
  double delta = 0.8;        // in (0,1): both the confidence and fraction bar
  bool closed_loop = true;   // false: open-loop, all steps unconditional
  double alpha = 0.2;        // EMA weight for new predictions
};

void validate(const LoopConfig& config);

// Trigger-and-alternate controller. Before the trigger every step is
// unconditional; once the confident-pixel fraction exceeds delta the step
// turns conditional and the mode alternates C,U,C,U,... from there on. The
// trigger is never re-checked.
struct ControllerState {
  bool triggered = false;
  StepMode next_mode = StepMode::kConditional;  // valid once triggered
};

StepMode controller_step(ControllerState& state, const EmaTrace& trace,
                         const LoopConfig& config);

}  // namespace rvgen
