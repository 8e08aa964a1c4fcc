#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvgen/diffusion.hpp"
#include "rvgen/metrics.hpp"
#include "rvgen/range_codec.hpp"
#include "rvgen/scene_synth.hpp"

namespace rvgen {

// The single run configuration shared by all commands. Every knob has a
// default; a JSON config file plus --set key=value overrides adjust them.
// Unknown keys are rejected (usage error).
struct RunConfig {
  SensorConfig sensor;

  int num_classes = 5;
  std::vector<PaletteColor> palette;  // defaults to default_palette(num_classes)

  NoiseSchedule schedule;

  TrainConfig train;
  ToyConfig toy;
  double unlabeled_fraction = 0.0;  // leading corpus fraction loaded label-free

  SamplerConfig sampler;
  LoopConfig loop;

  EvalConfig eval;
  int scene_hist_bins = 32;
  int radial_hist_bins = 16;

  WorldSpec world;
  JitterConfig jitter;
  int synth_count = 8;
  std::uint64_t synth_seed = 99;

  double oracle_logit_scale = 20.0;
};

// Defaults, optionally overlaid with a JSON file, then with --set overrides
// of the form "section.key=value" (values parsed as JSON scalars).
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides);

// The effective configuration, round-trippable through load_config.
nlohmann::ordered_json config_to_json(const RunConfig& config);

void validate(const RunConfig& config);

}  // namespace rvgen
