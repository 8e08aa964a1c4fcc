#include "rvgen/denoiser.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "json.hpp"
#include "rvgen/errors.hpp"
#include "rvgen/scene_io.hpp"

namespace rvgen {

namespace {

void validate(const ToyConfig& config) {
  if (config.num_classes < 1)
    throw UsageError("toy config: num_classes must be >= 1");
  if (config.hidden_dim < 1)
    throw UsageError("toy config: hidden_dim must be >= 1");
  if (config.time_buckets < 1)
    throw UsageError("toy config: time_buckets must be >= 1");
  if (!(config.init_scale > 0.0) || !std::isfinite(config.init_scale))
    throw UsageError("toy config: init_scale must be positive");
}

}  // namespace

// --- oracle ---------------------------------------------------------------

OracleDenoiser::OracleDenoiser(Grid x0, std::vector<int> class_ids,
                               int num_classes, NoiseSchedule schedule,
                               double logit_scale)
    : x0_(std::move(x0)),
      class_ids_(std::move(class_ids)),
      num_classes_(num_classes),
      schedule_(schedule),
      logit_scale_(logit_scale) {
  if (x0_.channels != 2)
    throw UsageError("oracle denoiser: memorized tensor must have 2 channels");
  if (num_classes_ < 1)
    throw UsageError("oracle denoiser: num_classes must be >= 1");
  if (class_ids_.size() !=
      static_cast<std::size_t>(x0_.height) * x0_.width)
    throw UsageError("oracle denoiser: class map size mismatch");
  for (int id : class_ids_)
    if (id < 0 || id >= num_classes_)
      throw UsageError("oracle denoiser: class id outside [0, num_classes)");
  if (!(logit_scale_ > 0.0))
    throw UsageError("oracle denoiser: logit_scale must be positive");
}

DenoiserOutput OracleDenoiser::forward(const DenoiserInput& input) const {
  if (input.x_t == nullptr)
    throw UsageError("oracle denoiser: x_t is required");
  if (!input.x_t->same_shape(x0_))
    throw UsageError("oracle denoiser: x_t shape mismatch");
  double a = schedule_.alpha(input.t);
  double s = schedule_.sigma(input.t);
  DenoiserOutput out;
  out.eps_hat = Grid(x0_.height, x0_.width, 2);
  for (std::size_t i = 0; i < x0_.data.size(); ++i)
    out.eps_hat.data[i] = (input.x_t->data[i] - a * x0_.data[i]) / s;
  out.sem_logits = Grid(x0_.height, x0_.width, num_classes_, 0.0);
  for (int r = 0; r < x0_.height; ++r)
    for (int c = 0; c < x0_.width; ++c)
      out.sem_logits.at(r, c,
                        class_ids_[static_cast<std::size_t>(r) * x0_.width + c]) =
          logit_scale_;
  return out;
}

// --- toy network ------------------------------------------------------------

ToyDenoiser::ToyDenoiser(ToyConfig config, std::uint64_t init_seed)
    : config_(config) {
  validate(config_);
  params_.resize(param_count());
  Rng rng(init_seed);
  int in = config_.input_dim();
  double w1_scale = config_.init_scale / std::sqrt(static_cast<double>(in));
  double w2_scale =
      config_.init_scale / std::sqrt(static_cast<double>(config_.hidden_dim));
  std::size_t i = 0;
  for (; i < w2_offset(); ++i) params_[i] = w1_scale * rng.normal();
  for (; i < emb_offset(); ++i) params_[i] = w2_scale * rng.normal();
  for (; i < params_.size(); ++i) params_[i] = w2_scale * rng.normal();
}

std::size_t ToyDenoiser::w2_offset() const {
  return static_cast<std::size_t>(config_.hidden_dim) * config_.input_dim();
}

std::size_t ToyDenoiser::emb_offset() const {
  return w2_offset() +
         static_cast<std::size_t>(config_.output_dim()) * config_.hidden_dim;
}

std::size_t ToyDenoiser::param_count() const {
  return emb_offset() +
         static_cast<std::size_t>(config_.time_buckets) * config_.hidden_dim;
}

int ToyDenoiser::time_bucket(double t) const {
  int b = static_cast<int>(std::floor(t * config_.time_buckets));
  if (b < 0) b = 0;
  if (b >= config_.time_buckets) b = config_.time_buckets - 1;
  return b;
}

namespace {

void validate_input(const DenoiserInput& input, const ToyConfig& config) {
  if (input.x_t == nullptr)
    throw UsageError("toy denoiser: x_t is required");
  if (input.x_t->channels != 2)
    throw UsageError("toy denoiser: x_t must have 2 channels");
  if (input.condition == nullptr)
    throw UsageError("toy denoiser: condition image is required");
  if (input.condition->channels != 4 ||
      input.condition->height != input.x_t->height ||
      input.condition->width != input.x_t->width)
    throw UsageError("toy denoiser: condition image shape mismatch");
  if (config.use_coord_features) {
    if (input.coord_features == nullptr)
      throw UsageError("toy denoiser: coordinate features are required");
    if (input.coord_features->channels != config.coord_dim() ||
        input.coord_features->height != input.x_t->height ||
        input.coord_features->width != input.x_t->width)
      throw UsageError("toy denoiser: coordinate feature shape mismatch");
  }
  if (input.t < 0.0 || input.t > 1.0)
    throw UsageError("toy denoiser: t must lie in [0,1]");
}

}  // namespace

DenoiserOutput ToyDenoiser::forward_cached(const DenoiserInput& input,
                                           Cache& cache) const {
  validate_input(input, config_);
  int h = input.x_t->height, w = input.x_t->width;
  int in = config_.input_dim(), hid = config_.hidden_dim;
  int out_dim = config_.output_dim();
  cache.height = h;
  cache.width = w;
  cache.bucket = time_bucket(input.t);
  cache.inputs.assign(static_cast<std::size_t>(h) * w * in, 0.0);
  cache.hidden.assign(static_cast<std::size_t>(h) * w * hid, 0.0);

  DenoiserOutput out;
  out.eps_hat = Grid(h, w, 2);
  out.sem_logits = Grid(h, w, config_.num_classes);
  const double* w1 = params_.data() + w1_offset();
  const double* w2 = params_.data() + w2_offset();
  const double* emb =
      params_.data() + emb_offset() + static_cast<std::size_t>(cache.bucket) * hid;

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::size_t px = static_cast<std::size_t>(r) * w + c;
      double* z = cache.inputs.data() + px * in;
      z[0] = input.x_t->at(r, c, 0);
      z[1] = input.x_t->at(r, c, 1);
      for (int ch = 0; ch < 4; ++ch) z[2 + ch] = input.condition->at(r, c, ch);
      for (int ch = 0; ch < config_.coord_dim(); ++ch)
        z[6 + ch] = input.coord_features->at(r, c, ch);

      double* hvec = cache.hidden.data() + px * hid;
      for (int j = 0; j < hid; ++j) {
        double pre = emb[j];
        const double* row = w1 + static_cast<std::size_t>(j) * in;
        for (int i = 0; i < in; ++i) pre += row[i] * z[i];
        hvec[j] = std::tanh(pre);
      }
      for (int o = 0; o < out_dim; ++o) {
        double acc = 0.0;
        const double* row = w2 + static_cast<std::size_t>(o) * hid;
        for (int j = 0; j < hid; ++j) acc += row[j] * hvec[j];
        if (o < 2)
          out.eps_hat.at(r, c, o) = acc;
        else
          out.sem_logits.at(r, c, o - 2) = acc;
      }
    }
  }
  return out;
}

DenoiserOutput ToyDenoiser::forward(const DenoiserInput& input) const {
  Cache scratch;
  return forward_cached(input, scratch);
}

std::vector<double> ToyDenoiser::backward(const Cache& cache,
                                          const Grid& upstream) const {
  int in = config_.input_dim(), hid = config_.hidden_dim;
  int out_dim = config_.output_dim();
  if (upstream.height != cache.height || upstream.width != cache.width ||
      upstream.channels != out_dim)
    throw UsageError("toy denoiser backward: upstream gradient shape mismatch");
  if (cache.inputs.size() !=
          static_cast<std::size_t>(cache.height) * cache.width * in ||
      cache.hidden.size() !=
          static_cast<std::size_t>(cache.height) * cache.width * hid)
    throw UsageError("toy denoiser backward: cache does not match the config");

  std::vector<double> grads(param_count(), 0.0);
  double* d_w1 = grads.data() + w1_offset();
  double* d_w2 = grads.data() + w2_offset();
  double* d_emb =
      grads.data() + emb_offset() + static_cast<std::size_t>(cache.bucket) * hid;
  const double* w2 = params_.data() + w2_offset();

  std::vector<double> dh(hid);
  for (int r = 0; r < cache.height; ++r) {
    for (int c = 0; c < cache.width; ++c) {
      std::size_t px = static_cast<std::size_t>(r) * cache.width + c;
      const double* z = cache.inputs.data() + px * in;
      const double* hvec = cache.hidden.data() + px * hid;

      std::fill(dh.begin(), dh.end(), 0.0);
      for (int o = 0; o < out_dim; ++o) {
        double g = upstream.at(r, c, o);
        if (g == 0.0) continue;
        double* w2_row = d_w2 + static_cast<std::size_t>(o) * hid;
        const double* row = w2 + static_cast<std::size_t>(o) * hid;
        for (int j = 0; j < hid; ++j) {
          w2_row[j] += g * hvec[j];
          dh[j] += row[j] * g;
        }
      }
      for (int j = 0; j < hid; ++j) {
        double dpre = (1.0 - hvec[j] * hvec[j]) * dh[j];
        if (dpre == 0.0) continue;
        double* w1_row = d_w1 + static_cast<std::size_t>(j) * in;
        for (int i = 0; i < in; ++i) w1_row[i] += dpre * z[i];
        d_emb[j] += dpre;
      }
    }
  }
  return grads;
}

Grid coord_fourier_features(const SensorConfig& sensor) {
  validate(sensor);
  Grid feats(sensor.height_px, sensor.width_px, 32);
  for (int r = 0; r < sensor.height_px; ++r) {
    double el = elevation_center(sensor, r);
    for (int c = 0; c < sensor.width_px; ++c) {
      double az = azimuth_center(sensor, c);
      for (int j = 0; j < 8; ++j) {
        double f = static_cast<double>(1 << j);
        feats.at(r, c, 4 * j + 0) = std::sin(f * az);
        feats.at(r, c, 4 * j + 1) = std::cos(f * az);
        feats.at(r, c, 4 * j + 2) = std::sin(f * el);
        feats.at(r, c, 4 * j + 3) = std::cos(f * el);
      }
    }
  }
  return feats;
}

// --- optimizer --------------------------------------------------------------

Adam::Adam(std::size_t param_count, AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0))
    throw UsageError("adam: learning_rate must be positive");
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0)
    throw UsageError("adam: betas must lie in [0,1)");
  m_.assign(param_count, 0.0);
  v_.assign(param_count, 0.0);
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw UsageError("adam: parameter/gradient size mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    double m_hat = m_[i] / bc1;
    double v_hat = v_[i] / bc2;
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

// --- checkpointing ------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const ToyDenoiser& model,
                     std::uint64_t init_seed, std::int64_t train_steps,
                     ScheduleKind schedule) {
  const ToyConfig& cfg = model.config();
  nlohmann::ordered_json header;
  header["format"] = "rvgen-checkpoint-v1";
  header["num_classes"] = cfg.num_classes;
  header["hidden_dim"] = cfg.hidden_dim;
  header["time_buckets"] = cfg.time_buckets;
  header["use_coord_features"] = cfg.use_coord_features;
  header["init_scale"] = cfg.init_scale;
  header["init_seed"] = init_seed;
  header["train_steps"] = train_steps;
  header["schedule"] = to_string(schedule);
  header["param_count"] = model.param_count();
  std::string header_bytes = header.dump();

  std::string bytes;
  bytes.reserve(4 + header_bytes.size() + model.param_count() * 4);
  std::uint32_t len = static_cast<std::uint32_t>(header_bytes.size());
  for (int i = 0; i < 4; ++i)
    bytes.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  bytes += header_bytes;
  for (double p : model.params()) {
    float f = static_cast<float>(p);
    std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i)
      bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  atomic_write_bytes(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("checkpoint: cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  auto fail = [&](const std::string& why) -> IoError {
    return IoError("checkpoint '" + path.string() + "': " + why);
  };
  if (bytes.size() < 4) throw fail("file too short");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i)
    len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i]))
           << (8 * i);
  if (bytes.size() < 4 + static_cast<std::size_t>(len))
    throw fail("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(4, len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("format").get<std::string>() != "rvgen-checkpoint-v1")
      throw fail("unknown format tag");
    ckpt.config.num_classes = header.at("num_classes").get<int>();
    ckpt.config.hidden_dim = header.at("hidden_dim").get<int>();
    ckpt.config.time_buckets = header.at("time_buckets").get<int>();
    ckpt.config.use_coord_features = header.at("use_coord_features").get<bool>();
    ckpt.config.init_scale = header.at("init_scale").get<double>();
    ckpt.init_seed = header.at("init_seed").get<std::uint64_t>();
    ckpt.train_steps = header.at("train_steps").get<std::int64_t>();
    ckpt.schedule = schedule_kind_from_string(header.at("schedule").get<std::string>());
    std::size_t count = header.at("param_count").get<std::size_t>();
    std::size_t payload = bytes.size() - 4 - len;
    if (payload != count * 4) throw fail("parameter payload size mismatch");
    ckpt.params.resize(count);
    const char* src = bytes.data() + 4 + len;
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b)
        u |= static_cast<std::uint32_t>(
                 static_cast<unsigned char>(src[i * 4 + b]))
             << (8 * b);
      ckpt.params[i] = static_cast<double>(std::bit_cast<float>(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad header field: ") + e.what());
  } catch (const UsageError& e) {
    throw fail(e.what());
  }
  return ckpt;
}

ToyDenoiser model_from_checkpoint(const Checkpoint& ckpt) {
  ToyDenoiser model(ckpt.config, ckpt.init_seed);
  if (ckpt.params.size() != model.param_count())
    throw IoError("checkpoint: parameter count does not match the config");
  model.params() = ckpt.params;
  return model;
}

}  // namespace rvgen
