#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rvgen/errors.hpp"
#include "rvgen/grid.hpp"

namespace rvgen {

// Cylindrical range-image geometry. Azimuth always spans the full circle;
// elevation spans [elevation_min, elevation_max] (radians).
struct SensorConfig {
  int height_px = 64;
  int width_px = 1024;
  double elevation_min = -0.43633231;  // -25 deg
  double elevation_max = 0.05235988;   // +3 deg
  double max_depth = 80.0;             // meters
};

void validate(const SensorConfig& s);

struct Point {
  double x = 0.0, y = 0.0, z = 0.0;
  double reflectance = 0.0;  // in [0,1]
};

// Labels are either absent or one per point (parallels the on-disk split
// into .bin and .label files).
struct PointCloud {
  std::vector<Point> points;
  std::vector<int> labels;  // empty, or points.size() entries, each in [0,C)

  bool labeled() const { return !labels.empty(); }
};

using PaletteColor = std::array<std::uint8_t, 3>;  // RGB

struct SemanticMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<int> class_ids;          // H*W, row-major, each in [0, num_classes)
  std::vector<PaletteColor> palette;   // num_classes entries, pairwise distinct

  int at(int r, int c) const { return class_ids[static_cast<std::size_t>(r) * width + c]; }
  int& at(int r, int c) { return class_ids[static_cast<std::size_t>(r) * width + c]; }
};

void validate(const SemanticMap& m);

// Two-channel range view. Valid pixels hold signed log-depth and signed
// reflectance in [-1,1]; empty pixels hold the sentinel (-1,-1) with
// mask = false. The mask is authoritative for emptiness.
struct RangeScene {
  SensorConfig sensor;
  std::vector<double> depth_log;    // H*W
  std::vector<double> reflectance;  // H*W
  std::vector<std::uint8_t> mask;   // H*W, 0/1

  static constexpr double kSentinel = -1.0;

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * sensor.width_px + c;
  }
  // Both planes stacked as an H x W x 2 tensor (diffusion state layout).
  Grid to_tensor() const;
};

// Scene from an H x W x 2 tensor; pixels at or below mask_threshold in the
// depth channel become empty and are snapped to the exact sentinel.
RangeScene scene_from_tensor(const Grid& tensor, const SensorConfig& sensor,
                             double mask_threshold);

// Semantic conditioning image: palette RGB scaled to [0,1] plus an indicator
// channel; all four channels are zero when unconditioned.
struct ConditionImage {
  Grid planes;  // H x W x 4
};

// --- scalar transforms ---------------------------------------------------

// [0, max_depth] -> [0, 1], compressive log map.
double depth_to_log(double depth, double max_depth);
// Inverse of depth_to_log.
double log_to_depth(double v, double max_depth);
// [0,1] -> [-1,1] and back.
double rescale_to_signed(double v);
double signed_to_unit(double v);

// --- angular binning (conventions documented at the definitions) ---------

double azimuth_center(const SensorConfig& s, int col);
double elevation_center(const SensorConfig& s, int row);
int azimuth_to_col(const SensorConfig& s, double azimuth);
// -1 when the elevation lies outside the sensor span.
int elevation_to_row(const SensorConfig& s, double elevation);

// --- projection -----------------------------------------------------------

struct Projection {
  RangeScene scene;
  std::optional<SemanticMap> semantics;  // present iff the cloud was labeled
  std::vector<std::int32_t> winner;      // H*W source index per pixel, -1 empty
  std::size_t dropped = 0;               // out-of-span, beyond-range, degenerate
};

// Projects a cloud into the range view; on pixel collisions the nearest
// point wins. A labeled cloud yields a SemanticMap (empty pixels get class
// 0) built over `num_classes` classes with the given palette.
Projection project_cloud(const PointCloud& cloud, const SensorConfig& sensor,
                         int num_classes = 0,
                         const std::vector<PaletteColor>& palette = {});

// One point per masked pixel, positioned on the bin-center ray at the
// decoded depth. The overload with a map carries labels through.
PointCloud unproject_scene(const RangeScene& scene);
PointCloud unproject_scene(const RangeScene& scene, const SemanticMap& map);

// --- conditioning ---------------------------------------------------------

// conditioned = true requires a map; false ignores it and yields all zeros.
ConditionImage encode_condition(const SemanticMap* map, bool conditioned,
                                int height, int width);
// Exact inverse of the conditioned encoding (palette lookup per pixel).
SemanticMap decode_condition(const ConditionImage& img,
                             const std::vector<PaletteColor>& palette,
                             int num_classes);

// --- palette --------------------------------------------------------------

// First entries mirror a common 20-class LiDAR color scheme; classes beyond
// the table get a deterministic distinct fallback. Entries are pairwise
// distinct for any num_classes < 65536.
std::vector<PaletteColor> default_palette(int num_classes);

}  // namespace rvgen
