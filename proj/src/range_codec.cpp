#include "rvgen/range_codec.hpp"

#include <cmath>
#include <string>

namespace rvgen {

void validate(const SensorConfig& s) {
  if (s.height_px < 1 || s.width_px < 1)
    throw UsageError("sensor: pixel dimensions must be at least 1x1");
  if (!(s.elevation_min < s.elevation_max))
    throw UsageError("sensor: elevation_min must be below elevation_max");
  if (!(s.max_depth > 0.0)) throw UsageError("sensor: max_depth must be positive");
}

void validate(const SemanticMap& m) {
  if (m.height < 1 || m.width < 1) throw UsageError("semantic map: empty dimensions");
  if (m.num_classes < 1) throw UsageError("semantic map: needs at least one class");
  if (m.class_ids.size() != static_cast<std::size_t>(m.height) * m.width)
    throw UsageError("semantic map: class id count does not match dimensions");
  if (m.palette.size() != static_cast<std::size_t>(m.num_classes))
    throw UsageError("semantic map: palette size does not match class count");
  for (int id : m.class_ids)
    if (id < 0 || id >= m.num_classes)
      throw UsageError("semantic map: class id " + std::to_string(id) +
                       " out of range");
  for (std::size_t i = 0; i < m.palette.size(); ++i)
    for (std::size_t j = i + 1; j < m.palette.size(); ++j)
      if (m.palette[i] == m.palette[j])
        throw UsageError("semantic map: palette entries must be distinct");
}

double depth_to_log(double depth, double max_depth) {
  if (!(max_depth > 0.0)) throw DomainError("depth_to_log: max_depth must be positive");
  if (!(depth >= 0.0) || depth > max_depth)
    throw DomainError("depth_to_log: depth " + std::to_string(depth) +
                      " outside [0, " + std::to_string(max_depth) + "]");
  return std::log1p(depth) / std::log1p(max_depth);
}

double log_to_depth(double v, double max_depth) {
  if (!(max_depth > 0.0)) throw DomainError("log_to_depth: max_depth must be positive");
  if (!(v >= 0.0) || v > 1.0)
    throw DomainError("log_to_depth: value outside [0,1]");
  return std::expm1(v * std::log1p(max_depth));
}

double rescale_to_signed(double v) {
  if (!(v >= 0.0) || v > 1.0)
    throw DomainError("rescale_to_signed: value outside [0,1]");
  return 2.0 * v - 1.0;
}

double signed_to_unit(double v) {
  if (!(v >= -1.0) || v > 1.0)
    throw DomainError("signed_to_unit: value outside [-1,1]");
  return (v + 1.0) / 2.0;
}

// Azimuth convention: atan2(y,x) in [-pi,pi], column 0 at -pi, increasing
// counter-clockwise. Elevation convention: row 0 at elevation_max (image
// top). Both clamp the closed upper boundary into the last bin.
double azimuth_center(const SensorConfig& s, int col) {
  return -M_PI + (col + 0.5) / s.width_px * 2.0 * M_PI;
}

double elevation_center(const SensorConfig& s, int row) {
  double span = s.elevation_max - s.elevation_min;
  return s.elevation_max - (row + 0.5) / s.height_px * span;
}

int azimuth_to_col(const SensorConfig& s, double azimuth) {
  double u = (azimuth + M_PI) / (2.0 * M_PI);
  int col = static_cast<int>(u * s.width_px);
  if (col >= s.width_px) col = s.width_px - 1;
  if (col < 0) col = 0;
  return col;
}

int elevation_to_row(const SensorConfig& s, double elevation) {
  if (elevation < s.elevation_min || elevation > s.elevation_max) return -1;
  double span = s.elevation_max - s.elevation_min;
  int row = static_cast<int>((s.elevation_max - elevation) / span * s.height_px);
  if (row >= s.height_px) row = s.height_px - 1;
  if (row < 0) row = 0;
  return row;
}

Grid RangeScene::to_tensor() const {
  Grid t(sensor.height_px, sensor.width_px, 2);
  for (int r = 0; r < sensor.height_px; ++r) {
    for (int c = 0; c < sensor.width_px; ++c) {
      std::size_t i = index(r, c);
      t.at(r, c, 0) = depth_log[i];
      t.at(r, c, 1) = reflectance[i];
    }
  }
  return t;
}

RangeScene scene_from_tensor(const Grid& tensor, const SensorConfig& sensor,
                             double mask_threshold) {
  validate(sensor);
  if (tensor.channels != 2 || tensor.height != sensor.height_px ||
      tensor.width != sensor.width_px)
    throw UsageError("scene_from_tensor: tensor shape does not match sensor");
  RangeScene scene;
  scene.sensor = sensor;
  std::size_t n = static_cast<std::size_t>(sensor.height_px) * sensor.width_px;
  scene.depth_log.assign(n, RangeScene::kSentinel);
  scene.reflectance.assign(n, RangeScene::kSentinel);
  scene.mask.assign(n, 0);
  for (int r = 0; r < sensor.height_px; ++r) {
    for (int c = 0; c < sensor.width_px; ++c) {
      double d = tensor.at(r, c, 0);
      if (d <= mask_threshold) continue;  // empty: keep the exact sentinel
      std::size_t i = scene.index(r, c);
      scene.depth_log[i] = d;
      scene.reflectance[i] = tensor.at(r, c, 1);
      scene.mask[i] = 1;
    }
  }
  return scene;
}

Projection project_cloud(const PointCloud& cloud, const SensorConfig& sensor,
                         int num_classes,
                         const std::vector<PaletteColor>& palette) {
  validate(sensor);
  if (cloud.labeled() && cloud.labels.size() != cloud.points.size())
    throw UsageError("project_cloud: label count does not match point count");
  bool want_semantics = cloud.labeled();
  if (want_semantics) {
    if (num_classes < 1)
      throw UsageError("project_cloud: labeled cloud needs num_classes >= 1");
    if (palette.size() != static_cast<std::size_t>(num_classes))
      throw UsageError("project_cloud: palette size must equal num_classes");
  }

  std::size_t n = static_cast<std::size_t>(sensor.height_px) * sensor.width_px;
  Projection out;
  out.scene.sensor = sensor;
  out.scene.depth_log.assign(n, RangeScene::kSentinel);
  out.scene.reflectance.assign(n, RangeScene::kSentinel);
  out.scene.mask.assign(n, 0);
  out.winner.assign(n, -1);
  std::vector<double> best_depth(n, 0.0);

  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point& p = cloud.points[i];
    double d = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (d < 1e-12 || d > sensor.max_depth) {
      ++out.dropped;
      continue;
    }
    if (p.reflectance < 0.0 || p.reflectance > 1.0)
      throw UsageError("project_cloud: reflectance outside [0,1] at point " +
                       std::to_string(i));
    double elevation = std::asin(p.z / d);
    int row = elevation_to_row(sensor, elevation);
    if (row < 0) {
      ++out.dropped;
      continue;
    }
    int col = azimuth_to_col(sensor, std::atan2(p.y, p.x));
    std::size_t idx = out.scene.index(row, col);
    // Nearest return wins; exact ties keep the first-encountered point.
    if (out.winner[idx] >= 0 && !(d < best_depth[idx])) continue;
    out.winner[idx] = static_cast<std::int32_t>(i);
    best_depth[idx] = d;
    out.scene.depth_log[idx] = rescale_to_signed(depth_to_log(d, sensor.max_depth));
    out.scene.reflectance[idx] = rescale_to_signed(p.reflectance);
    out.scene.mask[idx] = 1;
  }

  if (want_semantics) {
    SemanticMap map;
    map.height = sensor.height_px;
    map.width = sensor.width_px;
    map.num_classes = num_classes;
    map.palette = palette;
    map.class_ids.assign(n, 0);  // empty pixels: class 0 (background)
    for (std::size_t idx = 0; idx < n; ++idx) {
      if (out.winner[idx] < 0) continue;
      int label = cloud.labels[out.winner[idx]];
      if (label < 0 || label >= num_classes)
        throw UsageError("project_cloud: label " + std::to_string(label) +
                         " outside [0," + std::to_string(num_classes) + ")");
      map.class_ids[idx] = label;
    }
    validate(map);
    out.semantics = std::move(map);
  }
  return out;
}

namespace {

PointCloud unproject_impl(const RangeScene& scene, const SemanticMap* map) {
  validate(scene.sensor);
  const SensorConfig& s = scene.sensor;
  if (map) {
    if (map->height != s.height_px || map->width != s.width_px)
      throw UsageError("unproject_scene: semantic map dimensions mismatch");
  }
  PointCloud cloud;
  for (int r = 0; r < s.height_px; ++r) {
    double elevation = elevation_center(s, r);
    double ce = std::cos(elevation), se = std::sin(elevation);
    for (int c = 0; c < s.width_px; ++c) {
      std::size_t idx = scene.index(r, c);
      if (!scene.mask[idx]) continue;
      double depth = log_to_depth(signed_to_unit(scene.depth_log[idx]), s.max_depth);
      double azimuth = azimuth_center(s, c);
      Point p;
      p.x = depth * ce * std::cos(azimuth);
      p.y = depth * ce * std::sin(azimuth);
      p.z = depth * se;
      p.reflectance = signed_to_unit(scene.reflectance[idx]);
      cloud.points.push_back(p);
      if (map) cloud.labels.push_back(map->at(r, c));
    }
  }
  return cloud;
}

}  // namespace

PointCloud unproject_scene(const RangeScene& scene) {
  return unproject_impl(scene, nullptr);
}

PointCloud unproject_scene(const RangeScene& scene, const SemanticMap& map) {
  return unproject_impl(scene, &map);
}

ConditionImage encode_condition(const SemanticMap* map, bool conditioned,
                                int height, int width) {
  if (conditioned && map == nullptr)
    throw UsageError("encode_condition: conditioned encoding needs a semantic map");
  ConditionImage img;
  img.planes = Grid(height, width, 4, 0.0);
  if (!conditioned) return img;
  if (map->height != height || map->width != width)
    throw UsageError("encode_condition: semantic map dimensions mismatch");
  validate(*map);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const PaletteColor& col = map->palette[map->at(r, c)];
      img.planes.at(r, c, 0) = col[0] / 255.0;
      img.planes.at(r, c, 1) = col[1] / 255.0;
      img.planes.at(r, c, 2) = col[2] / 255.0;
      img.planes.at(r, c, 3) = 1.0;
    }
  }
  return img;
}

SemanticMap decode_condition(const ConditionImage& img,
                             const std::vector<PaletteColor>& palette,
                             int num_classes) {
  const Grid& g = img.planes;
  if (g.channels != 4) throw UsageError("decode_condition: expected 4 channels");
  if (palette.size() != static_cast<std::size_t>(num_classes))
    throw UsageError("decode_condition: palette size must equal num_classes");
  SemanticMap map;
  map.height = g.height;
  map.width = g.width;
  map.num_classes = num_classes;
  map.palette = palette;
  map.class_ids.assign(static_cast<std::size_t>(g.height) * g.width, 0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      PaletteColor col = {
          static_cast<std::uint8_t>(std::lround(g.at(r, c, 0) * 255.0)),
          static_cast<std::uint8_t>(std::lround(g.at(r, c, 1) * 255.0)),
          static_cast<std::uint8_t>(std::lround(g.at(r, c, 2) * 255.0))};
      int found = -1;
      for (int k = 0; k < num_classes; ++k) {
        if (palette[k] == col) {
          found = k;
          break;
        }
      }
      if (found < 0)
        throw UsageError("decode_condition: pixel color not in palette");
      map.at(r, c) = found;
    }
  }
  return map;
}

std::vector<PaletteColor> default_palette(int num_classes) {
  if (num_classes < 1) throw UsageError("default_palette: needs at least one class");
  if (num_classes >= 65536)
    throw UsageError("default_palette: class count too large");
  // RGB; first 20 entries follow a common LiDAR segmentation color scheme.
  static const PaletteColor named[] = {
      {0, 0, 0},       {100, 150, 245}, {100, 230, 245}, {30, 60, 150},
      {80, 30, 180},   {0, 0, 255},     {255, 30, 30},   {255, 40, 200},
      {150, 30, 90},   {255, 0, 255},   {255, 150, 255}, {75, 0, 75},
      {175, 0, 75},    {255, 200, 0},   {255, 120, 50},  {0, 175, 0},
      {135, 60, 0},    {150, 240, 80},  {255, 240, 150}, {255, 0, 0}};
  constexpr int kNamed = static_cast<int>(sizeof(named) / sizeof(named[0]));
  std::vector<PaletteColor> pal;
  pal.reserve(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    if (c < kNamed) {
      pal.push_back(named[c]);
    } else {
      // Deterministic fallback: (r,g) encodes c injectively for c < 65536,
      // and no named entry uses b = 119, so the two ranges never collide.
      auto r = static_cast<std::uint8_t>(c % 256);
      auto g = static_cast<std::uint8_t>((c / 256) % 256);
      pal.push_back({r, g, 119});
    }
  }
  return pal;
}

}  // namespace rvgen
