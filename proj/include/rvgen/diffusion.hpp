#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rvgen/denoiser.hpp"
#include "rvgen/grid.hpp"
#include "rvgen/range_codec.hpp"
#include "rvgen/rng.hpp"
#include "rvgen/schedule.hpp"
#include "rvgen/semantic_loop.hpp"

namespace rvgen {

// x_t = alpha_t * x0 + sigma_t * eps.
Grid forward_noise(const Grid& x0, double t, const Grid& eps,
                   const NoiseSchedule& schedule);

Grid sample_normal_grid(int height, int width, int channels, Rng& rng);

// --- training modes ---------------------------------------------------------

enum class TrainMode { kConditional, kUnconditional, kNonLabeled };

// The two mode switches: A gates the semantic condition input, B gates the
// semantic prediction loss. Only three combinations exist; (1,1) cannot be
// constructed.
class ModeSwitches {
 public:
  static ModeSwitches conditional() { return {true, false}; }
  static ModeSwitches unconditional() { return {false, true}; }
  static ModeSwitches non_labeled() { return {false, false}; }
  static ModeSwitches for_mode(TrainMode mode);

  bool condition_input() const { return a_; }
  bool semantic_loss() const { return b_; }

 private:
  ModeSwitches(bool a, bool b) : a_(a), b_(b) {}
  bool a_, b_;
};

const char* to_string(TrainMode mode);

// --- losses ------------------------------------------------------------------

// Mean squared error over all elements.
double loss_noise_mse(const Grid& eps_hat, const Grid& eps);

struct LossParts {
  double total = 0.0;
  double noise = 0.0;
  double semantic = 0.0;
};

// Joint loss: noise MSE plus mean per-pixel cross-entropy (natural log) of
// the softmaxed logits against the class map.
LossParts loss_unconditional(const Grid& eps_hat, const Grid& eps,
                             const Grid& sem_logits,
                             const std::vector<int>& class_ids);

// Noise MSE only (conditional and non-labeled modes).
LossParts loss_conditional(const Grid& eps_hat, const Grid& eps);

// --- training ----------------------------------------------------------------

struct TrainConfig {
  double cond_ratio = 0.5;  // psi_c: P(conditional) for labeled samples
  AdamConfig adam;          // learning_rate default 1e-4
  std::int64_t steps = 1000;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct TrainSample {
  const Grid* x0 = nullptr;           // H x W x 2
  const SemanticMap* map = nullptr;   // null: non-labeled sample
};

struct StepResult {
  TrainMode mode = TrainMode::kUnconditional;
  double t = 0.0;
  LossParts loss;
};

// One optimizer update on one sample. Draw order per step is fixed:
// psi (mode), then t, then the noise tensor. Labeled samples pick
// conditional when psi <= cond_ratio, unconditional otherwise; unlabeled
// samples always run non-labeled (psi is still drawn, keeping the stream
// aligned across corpora).
class Trainer {
 public:
  Trainer(ToyDenoiser& model, TrainConfig config, NoiseSchedule schedule,
          const Grid* coord_features = nullptr);

  StepResult step(const TrainSample& sample, Rng& rng);
  const TrainConfig& config() const { return config_; }

 private:
  ToyDenoiser& model_;
  TrainConfig config_;
  NoiseSchedule schedule_;
  Adam optimizer_;
  const Grid* coord_features_;
};

// --- sampling ----------------------------------------------------------------

enum class SamplerMethod { kDeterministic, kAncestral };

SamplerMethod sampler_method_from_string(const std::string& name);
std::string to_string(SamplerMethod method);

struct SamplerConfig {
  int nfe = 256;
  SamplerMethod method = SamplerMethod::kDeterministic;
  std::uint64_t seed = 0;
  double mask_threshold = -0.9;  // generated-pixel emptiness cut
};

void validate(const SamplerConfig& config);

// One reverse step from t_hi to t_lo (t_hi > t_lo >= 0).
// Both methods first reconstruct x0_hat = (x_t - sigma_hi*eps_hat)/alpha_hi,
// clamped to [-1,1]; a step to t_lo = 0 returns x0_hat directly.
// Deterministic: x_lo = alpha_lo*x0_hat + sigma_lo*eps_hat.
// Ancestral: Gaussian posterior mean plus noise scaled by the posterior
// std; `eta` supplies the standard normal draw (required unless t_lo = 0).
Grid sample_step(const Grid& x_t, double t_hi, double t_lo,
                 const DenoiserOutput& out, const Grid* eta,
                 const NoiseSchedule& schedule, SamplerMethod method);

struct GenerateStepTrace {
  int step = 0;
  double t_hi = 0.0;
  StepMode mode = StepMode::kUnconditional;
  bool triggered = false;
  double confidence = 0.0;  // fraction used for the decision (0 pre-init)
};

struct GenerateResult {
  RangeScene scene;
  SemanticMap semantics;  // argmax of the final EMA trace
  std::vector<GenerateStepTrace> trace;
};

// Full reverse trajectory from pure noise over `nfe` uniform-in-t steps.
// The closed-loop controller picks each step's mode; unconditional steps
// update the EMA semantic trace; conditional steps feed the trace's argmax
// back as the condition image.
GenerateResult generate(const Denoiser& denoiser, const SensorConfig& sensor,
                        const std::vector<PaletteColor>& palette,
                        const SamplerConfig& sampler, const LoopConfig& loop,
                        const NoiseSchedule& schedule, Rng& rng,
                        const Grid* coord_features = nullptr);

}  // namespace rvgen
