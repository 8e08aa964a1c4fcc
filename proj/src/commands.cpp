#include "rvgen/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rvgen/denoiser.hpp"
#include "rvgen/diffusion.hpp"
#include "rvgen/errors.hpp"
#include "rvgen/rng.hpp"
#include "rvgen/scene_io.hpp"
#include "rvgen/scene_synth.hpp"

namespace rvgen {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string numbered(const char* stem, int index, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d%s", stem, index, suffix);
  return buf;
}

// Sorted-by-filename .rvs listing; a missing directory is an I/O error.
std::vector<fs::path> list_rvs(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".rvs")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  return files;
}

std::vector<LabeledScene> load_labeled_set(const fs::path& dir,
                                           const SensorConfig& sensor) {
  std::vector<LabeledScene> set;
  for (const fs::path& file : list_rvs(dir)) {
    RvsContent content = read_rvs(file, sensor);
    if (!content.semantics)
      throw UsageError("evaluation needs labeled scenes; '" + file.string() +
                       "' has no semantic plane");
    set.push_back({std::move(content.scene), std::move(*content.semantics)});
  }
  return set;
}

ordered_json report_to_json(const MetricReport& rep) {
  ordered_json j;
  j["n_real"] = rep.n_real;
  j["n_gen"] = rep.n_gen;
  j["frd"] = rep.frd;
  j["s_frd"] = rep.s_frd;
  j["mmd_range"] = rep.mmd_range;
  j["s_mmd_range"] = rep.s_mmd_range;
  j["fpd"] = rep.fpd;
  j["s_fpd"] = rep.s_fpd;
  j["mmd_cart"] = rep.mmd_cart;
  j["s_mmd_cart"] = rep.s_mmd_cart;
  j["jsd"] = rep.jsd;
  j["s_jsd"] = rep.s_jsd;
  j["mmd_bev"] = rep.mmd_bev;
  j["s_mmd_bev"] = rep.s_mmd_bev;
  return j;
}

}  // namespace

void cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  validate(config);
  fs::create_directories(out_dir);

  std::vector<CorpusEntry> entries = corpus(
      config.synth_count, config.world, config.sensor, config.synth_seed,
      config.jitter);

  ordered_json manifest;
  manifest["count"] = config.synth_count;
  manifest["seed"] = config.synth_seed;
  manifest["num_classes"] = config.num_classes;
  ordered_json palette = ordered_json::array();
  for (const PaletteColor& c : config.palette)
    palette.push_back({c[0], c[1], c[2]});
  manifest["palette"] = palette;
  ordered_json files = ordered_json::array();

  for (int i = 0; i < config.synth_count; ++i) {
    Projection proj = project_cloud(entries[static_cast<std::size_t>(i)].cloud,
                                    config.sensor, config.num_classes,
                                    config.palette);
    std::string name = numbered("scene", i, ".rvs");
    write_rvs(out_dir / name, proj.scene,
              proj.semantics ? &*proj.semantics : nullptr);
    files.push_back(name);
  }
  manifest["files"] = files;
  atomic_write_bytes(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void cmd_train(const RunConfig& config, const fs::path& corpus_dir,
               const fs::path& model_path, const fs::path& log_path) {
  validate(config);
  std::vector<fs::path> files = list_rvs(corpus_dir);
  if (files.empty())
    throw UsageError("no .rvs scenes under '" + corpus_dir.string() + "'");

  // The leading fraction of the sorted corpus is loaded label-free, which
  // exercises the non-labeled training mode on mixed corpora.
  auto unlabeled_count = static_cast<std::size_t>(
      config.unlabeled_fraction * static_cast<double>(files.size()));

  std::vector<Grid> tensors;
  std::vector<std::optional<SemanticMap>> maps;
  tensors.reserve(files.size());
  maps.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    RvsContent content = read_rvs(files[i], config.sensor);
    tensors.push_back(content.scene.to_tensor());
    if (i < unlabeled_count)
      maps.emplace_back(std::nullopt);
    else
      maps.push_back(std::move(content.semantics));
  }

  std::uint64_t init_seed = derive_seed(config.train.seed, 1);
  ToyDenoiser model(config.toy, init_seed);
  std::optional<Grid> coords;
  if (config.toy.use_coord_features)
    coords = coord_fourier_features(config.sensor);
  Trainer trainer(model, config.train, config.schedule,
                  coords ? &*coords : nullptr);
  Rng rng(config.train.seed);

  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open train log '" + log_path.string() + "'");

  for (std::int64_t s = 0; s < config.train.steps; ++s) {
    std::size_t i = static_cast<std::size_t>(s) % tensors.size();
    TrainSample sample{&tensors[i], maps[i] ? &*maps[i] : nullptr};
    StepResult res = trainer.step(sample, rng);
    ordered_json line;
    line["step"] = s;
    line["mode"] = to_string(res.mode);
    line["t"] = res.t;
    line["loss"] = {{"total", res.loss.total},
                    {"noise", res.loss.noise},
                    {"semantic", res.loss.semantic}};
    log << line.dump() << "\n";
  }
  log.flush();
  if (!log) throw IoError("failed writing train log '" + log_path.string() + "'");

  if (model_path.has_parent_path())
    fs::create_directories(model_path.parent_path());
  save_checkpoint(model_path, model, init_seed, config.train.steps,
                  config.schedule.kind);
}

void cmd_generate(const RunConfig& config,
                  const std::optional<fs::path>& model_path,
                  const std::optional<fs::path>& oracle_scene, int count,
                  const fs::path& out_dir) {
  validate(config);
  if (model_path.has_value() == oracle_scene.has_value())
    throw UsageError("generate needs exactly one of a model checkpoint or an "
                     "oracle scene");
  if (count < 1) throw UsageError("generate count must be >= 1");

  std::unique_ptr<Denoiser> denoiser;
  std::optional<Grid> coords;
  if (model_path) {
    Checkpoint ckpt = load_checkpoint(*model_path);
    if (ckpt.config.num_classes != config.num_classes)
      throw UsageError("checkpoint was trained with " +
                       std::to_string(ckpt.config.num_classes) +
                       " classes but classes.count is " +
                       std::to_string(config.num_classes));
    if (ckpt.config.use_coord_features)
      coords = coord_fourier_features(config.sensor);
    denoiser = std::make_unique<ToyDenoiser>(model_from_checkpoint(ckpt));
  } else {
    RvsContent content = read_rvs(*oracle_scene, config.sensor);
    if (!content.semantics)
      throw UsageError("oracle scene '" + oracle_scene->string() +
                       "' has no semantic plane");
    if (content.semantics->num_classes != config.num_classes)
      throw UsageError("oracle scene has " +
                       std::to_string(content.semantics->num_classes) +
                       " classes but classes.count is " +
                       std::to_string(config.num_classes));
    denoiser = std::make_unique<OracleDenoiser>(
        content.scene.to_tensor(), content.semantics->class_ids,
        config.num_classes, config.schedule, config.oracle_logit_scale);
  }

  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(config.sampler.seed, static_cast<std::uint64_t>(i)));
    GenerateResult res =
        generate(*denoiser, config.sensor, config.palette, config.sampler,
                 config.loop, config.schedule, rng, coords ? &*coords : nullptr);
    write_rvs(out_dir / numbered("gen", i, ".rvs"), res.scene, &res.semantics);

    std::string trace;
    for (const GenerateStepTrace& step : res.trace) {
      ordered_json line;
      line["step"] = step.step;
      line["t_hi"] = step.t_hi;
      line["mode"] =
          step.mode == StepMode::kConditional ? "conditional" : "unconditional";
      line["triggered"] = step.triggered;
      line["confidence"] = step.confidence;
      trace += line.dump() + "\n";
    }
    atomic_write_bytes(out_dir / numbered("gen", i, ".trace.jsonl"), trace);
  }
}

MetricReport cmd_evaluate(const RunConfig& config, const fs::path& real_dir,
                          const fs::path& gen_dir,
                          const fs::path& report_path) {
  validate(config);
  std::vector<LabeledScene> real = load_labeled_set(real_dir, config.sensor);
  std::vector<LabeledScene> gen = load_labeled_set(gen_dir, config.sensor);

  ExtractorSet extractors = ExtractorSet::defaults(
      config.eval.bev, config.scene_hist_bins, config.radial_hist_bins);
  MetricReport rep = evaluate_sets(real, gen, extractors, config.eval);

  if (report_path.has_parent_path())
    fs::create_directories(report_path.parent_path());
  atomic_write_bytes(report_path, report_to_json(rep).dump(2) + "\n");
  return rep;
}

std::size_t cmd_project(const RunConfig& config, const fs::path& bin_path,
                        const std::optional<fs::path>& label_path,
                        const fs::path& out_rvs) {
  validate(config);
  PointCloud cloud = read_kitti_bin(bin_path);
  if (label_path) {
    read_kitti_labels(*label_path, cloud);
    for (int label : cloud.labels)
      if (label < 0 || label >= config.num_classes)
        throw UsageError("label " + std::to_string(label) +
                         " is outside [0, " +
                         std::to_string(config.num_classes) + ")");
  }
  Projection proj = project_cloud(cloud, config.sensor, config.num_classes,
                                  config.palette);
  if (out_rvs.has_parent_path()) fs::create_directories(out_rvs.parent_path());
  write_rvs(out_rvs, proj.scene, proj.semantics ? &*proj.semantics : nullptr,
            &cloud, &proj.winner);
  return proj.dropped;
}

void cmd_project_reverse(const RunConfig& config, const fs::path& rvs_path,
                         const fs::path& out_bin,
                         const std::optional<fs::path>& out_label) {
  validate(config);
  RvsContent content = read_rvs(rvs_path, config.sensor);
  PointCloud cloud = rvs_to_cloud(content);
  if (out_label && !cloud.labeled())
    throw UsageError("'" + rvs_path.string() +
                     "' has no semantic plane, cannot write labels");
  if (out_bin.has_parent_path()) fs::create_directories(out_bin.parent_path());
  write_kitti_bin(out_bin, cloud);
  if (out_label) {
    if (out_label->has_parent_path())
      fs::create_directories(out_label->parent_path());
    write_kitti_labels(*out_label, cloud);
  }
}

std::string cmd_report(const fs::path& report_path) {
  std::ifstream in(report_path);
  if (!in) throw IoError("cannot open report '" + report_path.string() + "'");
  json rep;
  try {
    rep = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("report '" + report_path.string() + "' is not valid JSON: " +
                  e.what());
  }

  auto num = [&](const char* key) -> double {
    if (!rep.contains(key) || !rep[key].is_number())
      throw UsageError("report '" + report_path.string() +
                       "' is missing numeric field '" + key + "'");
    return rep[key].get<double>();
  };

  std::ostringstream out;
  char buf[128];
  out << "scenes: " << num("n_real") << " real vs " << num("n_gen")
      << " generated\n";
  std::snprintf(buf, sizeof(buf), "%-22s %12s %12s\n", "metric", "plain",
                "semantic");
  out << buf;
  auto row = [&](const char* name, const char* plain, const char* sem) {
    std::snprintf(buf, sizeof(buf), "%-22s %12.6g %12.6g\n", name, num(plain),
                  num(sem));
    out << buf;
  };
  row("frechet (range view)", "frd", "s_frd");
  row("mmd (range view)", "mmd_range", "s_mmd_range");
  row("frechet (point cloud)", "fpd", "s_fpd");
  row("mmd (point cloud)", "mmd_cart", "s_mmd_cart");
  row("jsd (bev occupancy)", "jsd", "s_jsd");
  row("mmd (bev occupancy)", "mmd_bev", "s_mmd_bev");
  return out.str();
}

}  // namespace rvgen
