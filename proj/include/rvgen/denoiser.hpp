#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rvgen/grid.hpp"
#include "rvgen/range_codec.hpp"
#include "rvgen/rng.hpp"
#include "rvgen/schedule.hpp"

namespace rvgen {

struct DenoiserInput {
  const Grid* x_t = nullptr;          // H x W x 2
  const Grid* condition = nullptr;    // H x W x 4
  double t = 0.0;
  const Grid* coord_features = nullptr;  // optional H x W x K
};

struct DenoiserOutput {
  Grid eps_hat;     // H x W x 2
  Grid sem_logits;  // H x W x C, present on every call
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput forward(const DenoiserInput& input) const = 0;
  virtual int num_classes() const = 0;
};

// Exact denoiser around one memorized scene: eps_hat inverts the forward
// noising of the memorized tensor, semantic logits are a scaled one-hot of
// the memorized class map. Ignores the condition.
class OracleDenoiser : public Denoiser {
 public:
  OracleDenoiser(Grid x0, std::vector<int> class_ids, int num_classes,
                 NoiseSchedule schedule, double logit_scale = 20.0);

  DenoiserOutput forward(const DenoiserInput& input) const override;
  int num_classes() const override { return num_classes_; }
  const Grid& memorized() const { return x0_; }
  const std::vector<int>& memorized_classes() const { return class_ids_; }

 private:
  Grid x0_;
  std::vector<int> class_ids_;
  int num_classes_;
  NoiseSchedule schedule_;
  double logit_scale_;
};

// --- trainable toy denoiser ---------------------------------------------------

struct ToyConfig {
  int num_classes = 5;
  int hidden_dim = 16;
  int time_buckets = 32;
  bool use_coord_features = false;  // 32 Fourier features of pixel angles
  double init_scale = 0.3;

  int coord_dim() const { return use_coord_features ? 32 : 0; }
  int input_dim() const { return 2 + 4 + coord_dim(); }
  int output_dim() const { return 2 + num_classes; }
};

// Per-pixel two-layer network sharing weights across pixels:
//   h   = tanh(W1 * concat(x_t, condition, coords) + emb[bucket(t)])
//   out = W2 * h, split into eps_hat (2) and semantic logits (C).
// Parameters live in one flat vector: [W1 | W2 | emb], each row-major.
class ToyDenoiser : public Denoiser {
 public:
  ToyDenoiser(ToyConfig config, std::uint64_t init_seed);

  DenoiserOutput forward(const DenoiserInput& input) const override;
  int num_classes() const override { return config_.num_classes; }

  struct Cache {
    // Per pixel: input vector and hidden activation, plus the time bucket.
    std::vector<double> inputs;   // H*W*in
    std::vector<double> hidden;   // H*W*hidden
    int bucket = 0;
    int height = 0, width = 0;
  };
  DenoiserOutput forward_cached(const DenoiserInput& input, Cache& cache) const;

  // Analytic gradients of a scalar loss given upstream dL/d(out) as an
  // H x W x (2+C) grid. Layout matches params().
  std::vector<double> backward(const Cache& cache, const Grid& upstream) const;

  const ToyConfig& config() const { return config_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int time_bucket(double t) const;

  // Parameter block offsets within the flat vector.
  std::size_t w1_offset() const { return 0; }
  std::size_t w2_offset() const;
  std::size_t emb_offset() const;
  std::size_t param_count() const;

 private:
  ToyConfig config_;
  std::vector<double> params_;
};

// Fourier features of the pixel bin-center angles: for 8 octaves j,
// [sin(2^j az), cos(2^j az), sin(2^j el), cos(2^j el)] -> K = 32 channels.
Grid coord_fourier_features(const SensorConfig& sensor);

// --- optimizer ------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t param_count, AdamConfig config);
  void step(std::vector<double>& params, const std::vector<double>& grads);
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

// --- checkpointing --------------------------------------------------------
// File layout: uint32 header length, JSON header (shapes, seed, step count,
// schedule kind), float32 little-endian parameter payload.

struct Checkpoint {
  ToyConfig config;
  std::uint64_t init_seed = 0;
  std::int64_t train_steps = 0;
  ScheduleKind schedule = ScheduleKind::kCosine;
  std::vector<double> params;
};

void save_checkpoint(const std::filesystem::path& path, const ToyDenoiser& model,
                     std::uint64_t init_seed, std::int64_t train_steps,
                     ScheduleKind schedule);
Checkpoint load_checkpoint(const std::filesystem::path& path);
ToyDenoiser model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace rvgen
