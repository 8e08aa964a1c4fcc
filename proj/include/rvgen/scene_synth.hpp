#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rvgen/range_codec.hpp"

namespace rvgen {

// Axis-aligned box sitting in the world; class_id in [0, num_classes).
struct Box {
  std::array<double, 3> center{0.0, 0.0, 0.0};
  std::array<double, 3> size{1.0, 1.0, 1.0};  // full extents
  int class_id = 1;
};

// Ray-cast world: an infinite ground plane at z = ground_z (class 0) plus
// boxes. The sensor sits at the origin.
struct WorldSpec {
  double ground_z = -1.5;
  std::vector<Box> boxes;
  int num_classes = 5;
  std::uint64_t seed = 0;  // drives the deterministic reflectance jitter
};

void validate(const WorldSpec& w);

struct JitterConfig {
  double position_xy = 1.0;   // +- meters on box centers
  double size_fraction = 0.1; // +- relative on box extents
};

// One ray per range-image pixel (bin centers); the first surface hit within
// max_depth produces a labeled point whose reflectance is a class-keyed
// constant plus a small deterministic per-pixel jitter. Missed rays produce
// nothing.
PointCloud synthesize(const WorldSpec& world, const SensorConfig& sensor);

struct CorpusEntry {
  PointCloud cloud;
  WorldSpec world;
};

// n variants of base: index 0 reproduces base exactly; later indices jitter
// box x/y placement and size, deterministically per (seed, index).
std::vector<CorpusEntry> corpus(int n, const WorldSpec& base,
                                const SensorConfig& sensor, std::uint64_t seed,
                                const JitterConfig& jitter = {});

// Exposed for the ray-cast tests: first hit of the ray t*dir against the
// world, returning the distance and surface class; misses return t < 0.
struct RayHit {
  double t = -1.0;
  int class_id = -1;
};
RayHit first_hit(const WorldSpec& world, const std::array<double, 3>& dir,
                 double max_depth);

}  // namespace rvgen
