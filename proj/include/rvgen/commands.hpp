#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rvgen/config.hpp"
#include "rvgen/metrics.hpp"

namespace rvgen {

// Command bodies shared by the CLI binary and the tests. All of them throw
// on failure (UsageError family -> exit 2, everything else -> exit 1).

// Writes <out_dir>/scene_NNNN.rvs plus manifest.json (count, seed, palette,
// file list).
void cmd_synth(const RunConfig& config, const std::filesystem::path& out_dir);

// Trains the toy denoiser on every .rvs scene under corpus_dir (sorted);
// writes the checkpoint to model_path and one JSON line per step (step,
// mode, t, losses) to log_path.
void cmd_train(const RunConfig& config, const std::filesystem::path& corpus_dir,
               const std::filesystem::path& model_path,
               const std::filesystem::path& log_path);

// Samples `count` scenes into out_dir (gen_NNNN.rvs + gen_NNNN.trace.jsonl).
// Exactly one of model_path (toy checkpoint) or oracle_scene (memorized
// .rvs) must be given. Per-scene seeds derive from sampler.seed and the
// scene index.
void cmd_generate(const RunConfig& config,
                  const std::optional<std::filesystem::path>& model_path,
                  const std::optional<std::filesystem::path>& oracle_scene,
                  int count, const std::filesystem::path& out_dir);

// Evaluates gen_dir against real_dir (labeled .rvs sets) and writes the
// metric report JSON to report_path.
MetricReport cmd_evaluate(const RunConfig& config,
                          const std::filesystem::path& real_dir,
                          const std::filesystem::path& gen_dir,
                          const std::filesystem::path& report_path);

// KITTI .bin (+ optional .label) -> RVS with exact coordinate planes.
// Returns the number of dropped points.
std::size_t cmd_project(const RunConfig& config,
                        const std::filesystem::path& bin_path,
                        const std::optional<std::filesystem::path>& label_path,
                        const std::filesystem::path& out_rvs);

// RVS -> KITTI .bin (+ .label when the scene has a semantic plane). Uses
// the exact coordinate planes when present, bin-center unprojection
// otherwise.
void cmd_project_reverse(const RunConfig& config,
                         const std::filesystem::path& rvs_path,
                         const std::filesystem::path& out_bin,
                         const std::optional<std::filesystem::path>& out_label);

// Human-readable rendering of a metric report JSON file.
std::string cmd_report(const std::filesystem::path& report_path);

}  // namespace rvgen
