#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rvgen/range_codec.hpp"

namespace rvgen {

// --- RVS scene container ----------------------------------------------------
//
// Binary layout, all little-endian:
//   magic "RVS1"
//   uint32 height, width, channel_count, num_classes
//   channel_count float32 planes, each height*width row-major
// Plane order: depth_log, reflectance, mask [, class_ids] [, x, y, z].
// channel_count in {3,4,6,7}; num_classes is 0 exactly when the class plane
// is absent. depth_log holds the signed [-1,1] scene value; reflectance is
// stored in its physical [0,1] form so that float32 source reflectances
// survive bit-exactly. The optional x/y/z planes preserve the exact float32
// source coordinates of the point that won each pixel (empty pixels hold 0),
// so a cloud -> scene -> cloud conversion is lossless for surviving points.

struct RvsContent {
  RangeScene scene;
  std::optional<SemanticMap> semantics;
  // Exact source coordinates per pixel, H*W each, valid where mask is set.
  std::optional<std::vector<double>> exact_x, exact_y, exact_z;
};

// `exact_points`, when given, must be the projection source cloud paired
// with the per-pixel winner indices.
void write_rvs(const std::filesystem::path& path, const RangeScene& scene,
               const SemanticMap* semantics = nullptr,
               const PointCloud* exact_points = nullptr,
               const std::vector<std::int32_t>* winner = nullptr);

// `sensor` supplies the geometry the container does not store; its pixel
// dimensions must match the file header.
RvsContent read_rvs(const std::filesystem::path& path, const SensorConfig& sensor);

// Cloud from RVS content: exact planes when present, bin-center
// unprojection otherwise. Labels attach when a semantic plane is present.
PointCloud rvs_to_cloud(const RvsContent& content);

// --- KITTI-style point cloud files -------------------------------------------
// .bin: little-endian float32 quadruples (x, y, z, reflectance).
// .label: one little-endian uint32 per point; semantic class = low 16 bits.

PointCloud read_kitti_bin(const std::filesystem::path& bin_path);
// Attaches labels; the label count must match the cloud size.
void read_kitti_labels(const std::filesystem::path& label_path, PointCloud& cloud);
void write_kitti_bin(const std::filesystem::path& bin_path, const PointCloud& cloud);
void write_kitti_labels(const std::filesystem::path& label_path,
                        const PointCloud& cloud);

// --- low-level helpers --------------------------------------------------------

// Writes via a temp file in the same directory plus an atomic rename.
void atomic_write_bytes(const std::filesystem::path& path,
                        const std::string& bytes);

}  // namespace rvgen
