#include "rvgen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rvgen/errors.hpp"

namespace rvgen {

Grid forward_noise(const Grid& x0, double t, const Grid& eps,
                   const NoiseSchedule& schedule) {
  if (!x0.same_shape(eps))
    throw UsageError("forward_noise: x0 and eps shapes differ");
  double a = schedule.alpha(t);
  double s = schedule.sigma(t);
  Grid x_t(x0.height, x0.width, x0.channels);
  for (std::size_t i = 0; i < x0.data.size(); ++i)
    x_t.data[i] = a * x0.data[i] + s * eps.data[i];
  return x_t;
}

Grid sample_normal_grid(int height, int width, int channels, Rng& rng) {
  Grid g(height, width, channels);
  for (double& v : g.data) v = rng.normal();
  return g;
}

ModeSwitches ModeSwitches::for_mode(TrainMode mode) {
  switch (mode) {
    case TrainMode::kConditional:
      return conditional();
    case TrainMode::kUnconditional:
      return unconditional();
    case TrainMode::kNonLabeled:
      return non_labeled();
  }
  throw UsageError("unknown train mode");
}

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kConditional:
      return "conditional";
    case TrainMode::kUnconditional:
      return "unconditional";
    case TrainMode::kNonLabeled:
      return "non_labeled";
  }
  throw UsageError("unknown train mode");
}

double loss_noise_mse(const Grid& eps_hat, const Grid& eps) {
  if (!eps_hat.same_shape(eps))
    throw UsageError("loss_noise_mse: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.data.size(); ++i) {
    double d = eps_hat.data[i] - eps.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(eps.data.size());
}

LossParts loss_unconditional(const Grid& eps_hat, const Grid& eps,
                             const Grid& sem_logits,
                             const std::vector<int>& class_ids) {
  if (sem_logits.height != eps_hat.height || sem_logits.width != eps_hat.width)
    throw UsageError("loss_unconditional: logits shape mismatch");
  std::size_t pixels =
      static_cast<std::size_t>(sem_logits.height) * sem_logits.width;
  if (class_ids.size() != pixels)
    throw UsageError("loss_unconditional: class map size mismatch");

  double ce = 0.0;
  for (int r = 0; r < sem_logits.height; ++r) {
    for (int c = 0; c < sem_logits.width; ++c) {
      int target = class_ids[static_cast<std::size_t>(r) * sem_logits.width + c];
      if (target < 0 || target >= sem_logits.channels)
        throw UsageError("loss_unconditional: class id outside [0,C)");
      double mx = sem_logits.at(r, c, 0);
      for (int ch = 1; ch < sem_logits.channels; ++ch)
        mx = std::max(mx, sem_logits.at(r, c, ch));
      double denom = 0.0;
      for (int ch = 0; ch < sem_logits.channels; ++ch)
        denom += std::exp(sem_logits.at(r, c, ch) - mx);
      ce -= sem_logits.at(r, c, target) - mx - std::log(denom);
    }
  }
  LossParts parts;
  parts.noise = loss_noise_mse(eps_hat, eps);
  parts.semantic = ce / static_cast<double>(pixels);
  parts.total = parts.noise + parts.semantic;
  return parts;
}

LossParts loss_conditional(const Grid& eps_hat, const Grid& eps) {
  LossParts parts;
  parts.noise = loss_noise_mse(eps_hat, eps);
  parts.semantic = 0.0;
  parts.total = parts.noise;
  return parts;
}

void validate(const TrainConfig& config) {
  if (config.cond_ratio < 0.0 || config.cond_ratio > 1.0)
    throw UsageError("train config: cond_ratio must lie in [0,1]");
  if (config.steps < 1) throw UsageError("train config: steps must be >= 1");
  if (!(config.adam.learning_rate > 0.0))
    throw UsageError("train config: learning_rate must be positive");
}

Trainer::Trainer(ToyDenoiser& model, TrainConfig config, NoiseSchedule schedule,
                 const Grid* coord_features)
    : model_(model),
      config_(config),
      schedule_(schedule),
      optimizer_(model.param_count(), config.adam),
      coord_features_(coord_features) {
  validate(config_);
  if (model_.config().use_coord_features && coord_features_ == nullptr)
    throw UsageError("trainer: the model expects coordinate features");
}

StepResult Trainer::step(const TrainSample& sample, Rng& rng) {
  if (sample.x0 == nullptr || sample.x0->channels != 2)
    throw UsageError("trainer: sample needs an H x W x 2 clean tensor");
  int h = sample.x0->height, w = sample.x0->width;
  if (sample.map != nullptr) {
    if (sample.map->height != h || sample.map->width != w)
      throw UsageError("trainer: semantic map shape mismatch");
    if (sample.map->num_classes != model_.num_classes())
      throw UsageError("trainer: semantic map class count mismatch");
  }

  // Fixed draw order: psi (mode), t, then the noise tensor. psi is drawn
  // even for unlabeled samples so labeled and unlabeled corpora consume the
  // stream identically.
  double psi = rng.uniform01();
  double t = rng.uniform01();
  Grid eps = sample_normal_grid(h, w, 2, rng);

  TrainMode mode = TrainMode::kNonLabeled;
  if (sample.map != nullptr)
    mode = psi <= config_.cond_ratio ? TrainMode::kConditional
                                     : TrainMode::kUnconditional;
  ModeSwitches switches = ModeSwitches::for_mode(mode);

  Grid x_t = forward_noise(*sample.x0, t, eps, schedule_);
  ConditionImage cond = encode_condition(
      switches.condition_input() ? sample.map : nullptr,
      switches.condition_input(), h, w);

  DenoiserInput input{&x_t, &cond.planes, t, coord_features_};
  ToyDenoiser::Cache cache;
  DenoiserOutput out = model_.forward_cached(input, cache);

  StepResult result;
  result.mode = mode;
  result.t = t;
  result.loss = switches.semantic_loss()
                    ? loss_unconditional(out.eps_hat, eps, out.sem_logits,
                                         sample.map->class_ids)
                    : loss_conditional(out.eps_hat, eps);

  // Upstream gradients: d(MSE)/d(eps_hat) = 2*(eps_hat - eps)/numel; the
  // cross entropy contributes (softmax - onehot)/pixels on the logit slots.
  int num_classes = model_.num_classes();
  Grid upstream(h, w, 2 + num_classes, 0.0);
  double mse_scale = 2.0 / static_cast<double>(eps.data.size());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 2; ++ch)
        upstream.at(r, c, ch) =
            mse_scale * (out.eps_hat.at(r, c, ch) - eps.at(r, c, ch));
  if (switches.semantic_loss()) {
    Grid probs = softmax_per_pixel(out.sem_logits);
    double ce_scale = 1.0 / (static_cast<double>(h) * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        int target = sample.map->class_ids[static_cast<std::size_t>(r) * w + c];
        for (int ch = 0; ch < num_classes; ++ch) {
          double onehot = ch == target ? 1.0 : 0.0;
          upstream.at(r, c, 2 + ch) = ce_scale * (probs.at(r, c, ch) - onehot);
        }
      }
  }

  std::vector<double> grads = model_.backward(cache, upstream);
  optimizer_.step(model_.params(), grads);
  return result;
}

SamplerMethod sampler_method_from_string(const std::string& name) {
  if (name == "deterministic") return SamplerMethod::kDeterministic;
  if (name == "ancestral") return SamplerMethod::kAncestral;
  throw UsageError("unknown sampler method: '" + name + "'");
}

std::string to_string(SamplerMethod method) {
  switch (method) {
    case SamplerMethod::kDeterministic:
      return "deterministic";
    case SamplerMethod::kAncestral:
      return "ancestral";
  }
  throw UsageError("unknown sampler method");
}

void validate(const SamplerConfig& config) {
  if (config.nfe < 1) throw UsageError("sampler config: nfe must be >= 1");
  if (config.mask_threshold < -1.0 || config.mask_threshold >= 1.0)
    throw UsageError("sampler config: mask_threshold must lie in [-1,1)");
}

Grid sample_step(const Grid& x_t, double t_hi, double t_lo,
                 const DenoiserOutput& out, const Grid* eta,
                 const NoiseSchedule& schedule, SamplerMethod method) {
  if (!(t_hi > t_lo))
    throw UsageError("sample_step: t_hi must exceed t_lo");
  if (t_hi > 1.0 || t_lo < 0.0)
    throw UsageError("sample_step: times must lie in [0,1]");
  if (!out.eps_hat.same_shape(x_t))
    throw UsageError("sample_step: eps_hat shape mismatch");

  double a_hi = schedule.alpha(t_hi);
  double s_hi = schedule.sigma(t_hi);

  Grid x0_hat(x_t.height, x_t.width, x_t.channels);
  for (std::size_t i = 0; i < x_t.data.size(); ++i)
    x0_hat.data[i] = std::clamp(
        (x_t.data[i] - s_hi * out.eps_hat.data[i]) / a_hi, -1.0, 1.0);
  // The schedule clamp keeps sigma(0) > 0; stepping all the way down must
  // not leave that residue, so t_lo = 0 returns the reconstruction itself.
  if (t_lo == 0.0) return x0_hat;

  double a_lo = schedule.alpha(t_lo);
  double s_lo = schedule.sigma(t_lo);
  Grid x_lo(x_t.height, x_t.width, x_t.channels);
  if (method == SamplerMethod::kDeterministic) {
    for (std::size_t i = 0; i < x_t.data.size(); ++i)
      x_lo.data[i] = a_lo * x0_hat.data[i] + s_lo * out.eps_hat.data[i];
    return x_lo;
  }

  if (eta == nullptr)
    throw UsageError("sample_step: ancestral sampling needs a noise draw");
  if (!eta->same_shape(x_t))
    throw UsageError("sample_step: eta shape mismatch");
  double ratio = a_hi / a_lo;
  double beta = 1.0 - ratio * ratio;
  double var_scale = (s_lo * s_lo) / (s_hi * s_hi);
  double coef_x0 = a_lo * beta / (s_hi * s_hi);
  double coef_xt = ratio * var_scale;
  double noise_std = std::sqrt(var_scale * beta);
  for (std::size_t i = 0; i < x_t.data.size(); ++i)
    x_lo.data[i] = coef_x0 * x0_hat.data[i] + coef_xt * x_t.data[i] +
                   noise_std * eta->data[i];
  return x_lo;
}

GenerateResult generate(const Denoiser& denoiser, const SensorConfig& sensor,
                        const std::vector<PaletteColor>& palette,
                        const SamplerConfig& sampler, const LoopConfig& loop,
                        const NoiseSchedule& schedule, Rng& rng,
                        const Grid* coord_features) {
  validate(sensor);
  validate(sampler);
  validate(loop);
  int num_classes = denoiser.num_classes();
  if (palette.size() != static_cast<std::size_t>(num_classes))
    throw UsageError("generate: palette size must match the class count");

  int h = sensor.height_px, w = sensor.width_px;
  Grid x = sample_normal_grid(h, w, 2, rng);
  EmaTrace trace(h, w, num_classes, loop.alpha);
  ControllerState ctrl;

  GenerateResult result;
  result.trace.reserve(static_cast<std::size_t>(sampler.nfe));
  for (int k = 0; k < sampler.nfe; ++k) {
    double t_hi = 1.0 - static_cast<double>(k) / sampler.nfe;
    double t_lo = 1.0 - static_cast<double>(k + 1) / sampler.nfe;
    double confidence =
        trace.initialized() ? confidence_fraction(trace, loop.delta) : 0.0;
    StepMode mode = controller_step(ctrl, trace, loop);

    ConditionImage cond;
    if (mode == StepMode::kConditional) {
      SemanticMap fed;
      fed.height = h;
      fed.width = w;
      fed.num_classes = num_classes;
      fed.class_ids = argmax_per_pixel(trace.probs());
      fed.palette = palette;
      cond = encode_condition(&fed, true, h, w);
    } else {
      cond = encode_condition(nullptr, false, h, w);
    }

    DenoiserOutput out =
        denoiser.forward({&x, &cond.planes, t_hi, coord_features});
    if (mode == StepMode::kUnconditional)
      trace.update(softmax_per_pixel(out.sem_logits));

    // The extra draw happens after the network call and only when the step
    // actually injects noise, keeping the stream layout predictable.
    if (sampler.method == SamplerMethod::kAncestral && t_lo > 0.0) {
      Grid eta = sample_normal_grid(h, w, 2, rng);
      x = sample_step(x, t_hi, t_lo, out, &eta, schedule, sampler.method);
    } else {
      x = sample_step(x, t_hi, t_lo, out, nullptr, schedule, sampler.method);
    }
    result.trace.push_back({k, t_hi, mode, ctrl.triggered, confidence});
  }

  result.scene = scene_from_tensor(x, sensor, sampler.mask_threshold);
  result.semantics.height = h;
  result.semantics.width = w;
  result.semantics.num_classes = num_classes;
  result.semantics.class_ids = argmax_per_pixel(trace.probs());
  result.semantics.palette = palette;
  validate(result.semantics);
  return result;
}

}  // namespace rvgen
