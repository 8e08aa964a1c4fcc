#include "rvgen/config.hpp"

#include <fstream>
#include <string>
#include <type_traits>

#include "rvgen/errors.hpp"

namespace rvgen {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

WorldSpec default_world() {
  WorldSpec w;
  w.ground_z = -1.5;
  w.num_classes = 5;
  w.boxes.push_back({{10.0, 2.0, -0.3}, {4.0, 3.0, 2.4}, 1});
  w.boxes.push_back({{15.0, -7.0, -0.5}, {3.0, 3.0, 2.0}, 2});
  w.boxes.push_back({{6.0, 5.0, -0.6}, {2.0, 2.0, 1.8}, 3});
  return w;
}

ordered_json boxes_to_json(const std::vector<Box>& boxes) {
  ordered_json arr = ordered_json::array();
  for (const Box& b : boxes) {
    ordered_json j;
    j["center"] = {b.center[0], b.center[1], b.center[2]};
    j["size"] = {b.size[0], b.size[1], b.size[2]};
    j["class_id"] = b.class_id;
    arr.push_back(j);
  }
  return arr;
}

template <typename T>
T field(const json& section, const std::string& path, const char* key) {
  const std::string name = path + "." + key;
  if (!section.contains(key))
    throw UsageError("config: missing key '" + name + "'");
  const json& v = section.at(key);
  // nlohmann silently coerces across scalar types; enforce them instead.
  bool ok;
  const char* expected;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
    expected = "a boolean";
  } else if constexpr (std::is_same_v<T, std::string>) {
    ok = v.is_string();
    expected = "a string";
  } else if constexpr (std::is_integral_v<T>) {
    ok = v.is_number_integer() &&
         (!std::is_unsigned_v<T> || v.is_number_unsigned());
    expected = std::is_unsigned_v<T> ? "a non-negative integer" : "an integer";
  } else {
    ok = v.is_number();
    expected = "a number";
  }
  if (!ok)
    throw UsageError("config: '" + name + "' must be " + expected);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config: bad value for '" + name + "': " + e.what());
  }
}

std::array<double, 3> triple(const json& v, const std::string& path) {
  try {
    auto arr = v.get<std::vector<double>>();
    if (arr.size() != 3)
      throw UsageError("config: '" + path + "' must have 3 entries");
    return {arr[0], arr[1], arr[2]};
  } catch (const json::exception& e) {
    throw UsageError("config: bad value for '" + path + "': " + e.what());
  }
}

std::vector<Box> boxes_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array())
    throw UsageError("config: '" + path + "' must be an array of boxes");
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& j = arr[i];
    std::string box_path = path + "[" + std::to_string(i) + "]";
    if (!j.is_object())
      throw UsageError("config: '" + box_path + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "center" && it.key() != "size" && it.key() != "class_id")
        throw UsageError("config: unknown key '" + box_path + "." + it.key() +
                         "'");
    Box b;
    if (!j.contains("center") || !j.contains("size") || !j.contains("class_id"))
      throw UsageError("config: '" + box_path +
                       "' needs center, size and class_id");
    b.center = triple(j["center"], box_path + ".center");
    b.size = triple(j["size"], box_path + ".size");
    b.class_id = field<int>(j, box_path, "class_id");
    boxes.push_back(b);
  }
  return boxes;
}

// Overlay `incoming` onto `base`, rejecting keys absent from `base`.
// Arrays (the box list) are replaced wholesale.
void merge_strict(ordered_json& base, const json& incoming,
                  const std::string& path) {
  if (!incoming.is_object())
    throw UsageError("config: '" + (path.empty() ? "<root>" : path) +
                     "' must be a JSON object");
  for (auto it = incoming.begin(); it != incoming.end(); ++it) {
    std::string child = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key()))
      throw UsageError("config: unknown key '" + child + "'");
    ordered_json& slot = base[it.key()];
    if (slot.is_object())
      merge_strict(slot, it.value(), child);
    else
      slot = it.value();
  }
}

RunConfig config_from_json(const ordered_json& j) {
  RunConfig c;
  const json& sensor = j.at("sensor");
  c.sensor.height_px = field<int>(sensor, "sensor", "height_px");
  c.sensor.width_px = field<int>(sensor, "sensor", "width_px");
  c.sensor.elevation_min = field<double>(sensor, "sensor", "elevation_min");
  c.sensor.elevation_max = field<double>(sensor, "sensor", "elevation_max");
  c.sensor.max_depth = field<double>(sensor, "sensor", "max_depth");

  c.num_classes = field<int>(j.at("classes"), "classes", "count");

  c.schedule.kind = schedule_kind_from_string(
      field<std::string>(j.at("schedule"), "schedule", "kind"));

  const json& model = j.at("model");
  c.toy.hidden_dim = field<int>(model, "model", "hidden_dim");
  c.toy.time_buckets = field<int>(model, "model", "time_buckets");
  c.toy.use_coord_features = field<bool>(model, "model", "use_coord_features");
  c.toy.init_scale = field<double>(model, "model", "init_scale");
  c.toy.num_classes = c.num_classes;

  const json& train = j.at("train");
  c.train.cond_ratio = field<double>(train, "train", "cond_ratio");
  c.train.steps = field<std::int64_t>(train, "train", "steps");
  c.train.seed = field<std::uint64_t>(train, "train", "seed");
  c.train.adam.learning_rate = field<double>(train, "train", "learning_rate");
  c.train.adam.beta1 = field<double>(train, "train", "beta1");
  c.train.adam.beta2 = field<double>(train, "train", "beta2");
  c.train.adam.epsilon = field<double>(train, "train", "epsilon");

  c.unlabeled_fraction =
      field<double>(j.at("corpus"), "corpus", "unlabeled_fraction");

  const json& sampler = j.at("sampler");
  c.sampler.nfe = field<int>(sampler, "sampler", "nfe");
  c.sampler.method = sampler_method_from_string(
      field<std::string>(sampler, "sampler", "method"));
  c.sampler.seed = field<std::uint64_t>(sampler, "sampler", "seed");
  c.sampler.mask_threshold = field<double>(sampler, "sampler", "mask_threshold");

  const json& loop = j.at("loop");
  c.loop.delta = field<double>(loop, "loop", "delta");
  c.loop.closed_loop = field<bool>(loop, "loop", "closed_loop");
  c.loop.alpha = field<double>(loop, "loop", "alpha");

  const json& eval = j.at("eval");
  c.eval.bev.x_min = field<double>(eval, "eval", "bev_x_min");
  c.eval.bev.x_max = field<double>(eval, "eval", "bev_x_max");
  c.eval.bev.y_min = field<double>(eval, "eval", "bev_y_min");
  c.eval.bev.y_max = field<double>(eval, "eval", "bev_y_max");
  c.eval.bev.bins = field<int>(eval, "eval", "bev_bins");
  c.scene_hist_bins = field<int>(eval, "eval", "scene_hist_bins");
  c.radial_hist_bins = field<int>(eval, "eval", "radial_hist_bins");

  const json& synth = j.at("synth");
  c.synth_count = field<int>(synth, "synth", "count");
  c.synth_seed = field<std::uint64_t>(synth, "synth", "seed");
  c.world.ground_z = field<double>(synth, "synth", "ground_z");
  c.jitter.position_xy = field<double>(synth, "synth", "jitter_xy");
  c.jitter.size_fraction = field<double>(synth, "synth", "jitter_size");
  c.world.boxes = boxes_from_json(synth.at("boxes"), "synth.boxes");
  c.world.num_classes = c.num_classes;
  c.world.seed = c.synth_seed;

  c.oracle_logit_scale =
      field<double>(j.at("oracle"), "oracle", "logit_scale");

  c.palette = default_palette(c.num_classes);
  return c;
}

}  // namespace

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["sensor"] = {{"height_px", c.sensor.height_px},
                 {"width_px", c.sensor.width_px},
                 {"elevation_min", c.sensor.elevation_min},
                 {"elevation_max", c.sensor.elevation_max},
                 {"max_depth", c.sensor.max_depth}};
  j["classes"] = {{"count", c.num_classes}};
  j["schedule"] = {{"kind", to_string(c.schedule.kind)}};
  j["model"] = {{"hidden_dim", c.toy.hidden_dim},
                {"time_buckets", c.toy.time_buckets},
                {"use_coord_features", c.toy.use_coord_features},
                {"init_scale", c.toy.init_scale}};
  j["train"] = {{"cond_ratio", c.train.cond_ratio},
                {"steps", c.train.steps},
                {"seed", c.train.seed},
                {"learning_rate", c.train.adam.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon}};
  j["corpus"] = {{"unlabeled_fraction", c.unlabeled_fraction}};
  j["sampler"] = {{"nfe", c.sampler.nfe},
                  {"method", to_string(c.sampler.method)},
                  {"seed", c.sampler.seed},
                  {"mask_threshold", c.sampler.mask_threshold}};
  j["loop"] = {{"delta", c.loop.delta},
               {"closed_loop", c.loop.closed_loop},
               {"alpha", c.loop.alpha}};
  j["eval"] = {{"bev_x_min", c.eval.bev.x_min},
               {"bev_x_max", c.eval.bev.x_max},
               {"bev_y_min", c.eval.bev.y_min},
               {"bev_y_max", c.eval.bev.y_max},
               {"bev_bins", c.eval.bev.bins},
               {"scene_hist_bins", c.scene_hist_bins},
               {"radial_hist_bins", c.radial_hist_bins}};
  j["synth"] = ordered_json{{"count", c.synth_count},
                            {"seed", c.synth_seed},
                            {"ground_z", c.world.ground_z},
                            {"jitter_xy", c.jitter.position_xy},
                            {"jitter_size", c.jitter.size_fraction}};
  j["synth"]["boxes"] = boxes_to_json(c.world.boxes);
  j["oracle"] = {{"logit_scale", c.oracle_logit_scale}};
  return j;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
  RunConfig defaults;
  defaults.world = default_world();
  defaults.palette = default_palette(defaults.num_classes);
  defaults.toy.num_classes = defaults.num_classes;
  ordered_json tree = config_to_json(defaults);

  if (file) {
    std::ifstream in(*file);
    if (!in)
      throw IoError("config: cannot open '" + file->string() + "'");
    json parsed;
    try {
      parsed = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("config: '" + file->string() + "' is not valid JSON: " +
                       e.what());
    }
    merge_strict(tree, parsed, "");
  }

  for (const std::string& entry : overrides) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("config: override '" + entry +
                       "' must look like section.key=value");
    std::string key = entry.substr(0, eq);
    std::string raw = entry.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // unquoted strings pass through verbatim
    }

    ordered_json* node = &tree;
    std::size_t start = 0;
    std::string walked;
    while (true) {
      auto dot = key.find('.', start);
      std::string part = key.substr(start, dot - start);
      walked = walked.empty() ? part : walked + "." + part;
      if (!node->is_object() || !node->contains(part))
        throw UsageError("config: unknown key '" + walked + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (node->is_object())
      throw UsageError("config: '" + key + "' is a section, not a value");
    *node = value;
  }

  RunConfig config = config_from_json(tree);
  validate(config);
  return config;
}

void validate(const RunConfig& c) {
  validate(c.sensor);
  if (c.num_classes < 1 || c.num_classes > 65535)
    throw UsageError("config: classes.count must lie in [1, 65535]");
  if (c.palette.size() != static_cast<std::size_t>(c.num_classes))
    throw UsageError("config: palette size must match classes.count");
  if (c.toy.hidden_dim < 1)
    throw UsageError("config: model.hidden_dim must be >= 1");
  if (c.toy.time_buckets < 1)
    throw UsageError("config: model.time_buckets must be >= 1");
  if (!(c.toy.init_scale > 0.0))
    throw UsageError("config: model.init_scale must be positive");
  validate(c.train);
  if (c.unlabeled_fraction < 0.0 || c.unlabeled_fraction > 1.0)
    throw UsageError("config: corpus.unlabeled_fraction must lie in [0,1]");
  validate(c.sampler);
  validate(c.loop);
  validate(c.eval.bev);
  if (c.scene_hist_bins < 1)
    throw UsageError("config: eval.scene_hist_bins must be >= 1");
  if (c.radial_hist_bins < 1)
    throw UsageError("config: eval.radial_hist_bins must be >= 1");
  validate(c.world);
  if (c.jitter.position_xy < 0.0)
    throw UsageError("config: synth.jitter_xy must be >= 0");
  if (c.jitter.size_fraction < 0.0 || c.jitter.size_fraction >= 1.0)
    throw UsageError("config: synth.jitter_size must lie in [0,1)");
  if (c.synth_count < 1)
    throw UsageError("config: synth.count must be >= 1");
  if (!(c.oracle_logit_scale > 0.0))
    throw UsageError("config: oracle.logit_scale must be positive");
}

}  // namespace rvgen
