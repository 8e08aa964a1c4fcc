#include "rvgen/scene_synth.hpp"

#include <cmath>
#include <string>

#include "rvgen/rng.hpp"

namespace rvgen {

void validate(const WorldSpec& w) {
  if (w.num_classes < 1) throw UsageError("world: needs at least one class");
  for (std::size_t i = 0; i < w.boxes.size(); ++i) {
    const Box& b = w.boxes[i];
    for (int a = 0; a < 3; ++a)
      if (!(b.size[a] > 0.0))
        throw UsageError("world: box " + std::to_string(i) +
                         " has a non-positive extent");
    if (b.class_id < 0 || b.class_id >= w.num_classes)
      throw UsageError("world: box " + std::to_string(i) + " class id " +
                       std::to_string(b.class_id) + " outside [0," +
                       std::to_string(w.num_classes) + ")");
    if (b.center[2] - b.size[2] / 2.0 < w.ground_z - 1e-9)
      throw UsageError("world: box " + std::to_string(i) + " sinks below ground");
    bool contains_origin = true;
    for (int a = 0; a < 3; ++a)
      if (std::abs(b.center[a]) > b.size[a] / 2.0) contains_origin = false;
    if (contains_origin)
      throw UsageError("world: box " + std::to_string(i) +
                       " contains the sensor origin");
  }
}

RayHit first_hit(const WorldSpec& world, const std::array<double, 3>& dir,
                 double max_depth) {
  RayHit best;
  if (dir[2] != 0.0) {
    double t = world.ground_z / dir[2];
    if (t > 0.0 && t <= max_depth) best = {t, 0};
  }
  for (const Box& b : world.boxes) {
    double t_enter = -1e300, t_exit = 1e300;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      double lo = b.center[a] - b.size[a] / 2.0;
      double hi = b.center[a] + b.size[a] / 2.0;
      if (dir[a] == 0.0) {
        // Ray parallel to this slab: origin must lie between the planes.
        if (0.0 < lo || 0.0 > hi) miss = true;
        continue;
      }
      double t0 = (lo - 0.0) / dir[a];
      double t1 = (hi - 0.0) / dir[a];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > t_enter) t_enter = t0;
      if (t1 < t_exit) t_exit = t1;
    }
    if (miss || t_enter > t_exit || t_enter <= 0.0 || t_enter > max_depth)
      continue;
    if (best.t < 0.0 || t_enter < best.t) best = {t_enter, b.class_id};
  }
  return best;
}

namespace {

double class_reflectance(int class_id, std::uint64_t seed, int row, int col) {
  // Class-keyed constant spread by the golden ratio, plus a +-0.075
  // deterministic per-pixel jitter.
  constexpr double kGolden = 0.6180339887498949;
  double base = 0.15 + 0.7 * std::fmod(class_id * kGolden, 1.0);
  double jitter = 0.15 * (hash01(seed, static_cast<std::uint64_t>(row),
                                 static_cast<std::uint64_t>(col)) -
                          0.5);
  double r = base + jitter;
  return r < 0.0 ? 0.0 : r > 1.0 ? 1.0 : r;
}

}  // namespace

PointCloud synthesize(const WorldSpec& world, const SensorConfig& sensor) {
  validate(world);
  validate(sensor);
  PointCloud cloud;
  for (int r = 0; r < sensor.height_px; ++r) {
    double el = elevation_center(sensor, r);
    double ce = std::cos(el), se = std::sin(el);
    for (int c = 0; c < sensor.width_px; ++c) {
      double az = azimuth_center(sensor, c);
      std::array<double, 3> dir = {ce * std::cos(az), ce * std::sin(az), se};
      RayHit hit = first_hit(world, dir, sensor.max_depth);
      if (hit.t < 0.0) continue;
      Point p;
      p.x = hit.t * dir[0];
      p.y = hit.t * dir[1];
      p.z = hit.t * dir[2];
      p.reflectance = class_reflectance(hit.class_id, world.seed, r, c);
      cloud.points.push_back(p);
      cloud.labels.push_back(hit.class_id);
    }
  }
  return cloud;
}

std::vector<CorpusEntry> corpus(int n, const WorldSpec& base,
                                const SensorConfig& sensor, std::uint64_t seed,
                                const JitterConfig& jitter) {
  if (n < 1) throw UsageError("corpus: scene count must be at least 1");
  validate(base);
  std::vector<CorpusEntry> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    WorldSpec w = base;
    if (i > 0) {
      // Deterministic per (seed, index); index 0 reproduces the base.
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      w.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
      for (Box& b : w.boxes) {
        b.center[0] += rng.uniform(-jitter.position_xy, jitter.position_xy);
        b.center[1] += rng.uniform(-jitter.position_xy, jitter.position_xy);
        double scale = 1.0 + rng.uniform(-jitter.size_fraction, jitter.size_fraction);
        for (int a = 0; a < 3; ++a) b.size[a] *= scale;
        // Keep the footprint on the ground if scaling lifted the bottom.
        double bottom = b.center[2] - b.size[2] / 2.0;
        if (bottom < base.ground_z) b.center[2] += base.ground_z - bottom;
      }
      validate(w);
    }
    out.push_back({synthesize(w, sensor), std::move(w)});
  }
  return out;
}

}  // namespace rvgen
