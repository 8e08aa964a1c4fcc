#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "doctest.h"
#include "rvgen/range_codec.hpp"
#include "rvgen/scene_synth.hpp"

using namespace rvgen;

namespace {

SensorConfig synth_sensor() {
  SensorConfig s;
  s.height_px = 32;
  s.width_px = 128;
  s.elevation_min = -0.35;
  s.elevation_max = 0.25;
  s.max_depth = 80.0;
  return s;
}

WorldSpec demo_world() {
  WorldSpec w;
  w.ground_z = -1.5;
  w.num_classes = 5;
  w.seed = 424242;
  w.boxes.push_back({{10.0, 0.0, 0.0}, {4.0, 4.0, 3.0}, 1});
  w.boxes.push_back({{14.0, 9.0, -0.5}, {3.0, 3.0, 2.0}, 2});
  w.boxes.push_back({{8.0, -7.0, -0.25}, {2.0, 5.0, 2.5}, 3});
  return w;
}

// Independent slab-method ray intersection used as the oracle.
struct OracleHit {
  double t = -1.0;
  int cls = -1;
};

OracleHit oracle_cast(const WorldSpec& w, double dx, double dy, double dz,
                      double max_depth) {
  OracleHit best;
  if (dz != 0.0) {
    double t = w.ground_z / dz;
    if (t > 0.0 && t <= max_depth) best = {t, 0};
  }
  for (const Box& b : w.boxes) {
    double t_enter = -1e300, t_exit = 1e300;
    bool miss = false;
    double o[3] = {0.0, 0.0, 0.0};
    double d[3] = {dx, dy, dz};
    for (int a = 0; a < 3; ++a) {
      double lo = b.center[a] - b.size[a] / 2.0;
      double hi = b.center[a] + b.size[a] / 2.0;
      if (d[a] == 0.0) {
        if (o[a] < lo || o[a] > hi) miss = true;
        continue;
      }
      double t0 = (lo - o[a]) / d[a];
      double t1 = (hi - o[a]) / d[a];
      if (t0 > t1) std::swap(t0, t1);
      t_enter = std::max(t_enter, t0);
      t_exit = std::min(t_exit, t1);
    }
    if (miss || t_enter > t_exit || t_enter <= 0.0 || t_enter > max_depth)
      continue;
    if (best.t < 0.0 || t_enter < best.t) best = {t_enter, b.class_id};
  }
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("scene_synth");

TEST_CASE("every pixel matches the brute-force ray oracle") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  PointCloud cloud = synthesize(w, s);
  REQUIRE(cloud.labeled());

  std::size_t k = 0;
  for (int r = 0; r < s.height_px; ++r) {
    double el = elevation_center(s, r);
    for (int c = 0; c < s.width_px; ++c) {
      double az = azimuth_center(s, c);
      double dx = std::cos(el) * std::cos(az);
      double dy = std::cos(el) * std::sin(az);
      double dz = std::sin(el);
      OracleHit oh = oracle_cast(w, dx, dy, dz, s.max_depth);
      if (oh.t < 0.0) continue;  // miss: synthesize must emit nothing here
      REQUIRE(k < cloud.points.size());
      const Point& p = cloud.points[k];
      double t = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
      CHECK(std::abs(t - oh.t) <= 1e-9 * std::max(1.0, oh.t));
      CHECK(cloud.labels[k] == oh.cls);
      ++k;
    }
  }
  CHECK(k == cloud.points.size());
}

TEST_CASE("points sit exactly on their surfaces") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  PointCloud cloud = synthesize(w, s);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Point& p = cloud.points[i];
    int cls = cloud.labels[i];
    if (cls == 0) {
      CHECK(std::abs(p.z - w.ground_z) <= 1e-9);
      continue;
    }
    // Inside the labeled box (within tolerance) and on one of its faces.
    bool found = false;
    for (const Box& b : w.boxes) {
      if (b.class_id != cls) continue;
      double rx = std::abs(p.x - b.center[0]) - b.size[0] / 2.0;
      double ry = std::abs(p.y - b.center[1]) - b.size[1] / 2.0;
      double rz = std::abs(p.z - b.center[2]) - b.size[2] / 2.0;
      if (rx > 1e-9 || ry > 1e-9 || rz > 1e-9) continue;
      if (std::abs(rx) <= 1e-9 || std::abs(ry) <= 1e-9 || std::abs(rz) <= 1e-9)
        found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("synthetic points map one-to-one onto pixels") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  PointCloud cloud = synthesize(w, s);
  auto proj = project_cloud(cloud, s, w.num_classes, default_palette(w.num_classes));
  CHECK(proj.dropped == 0);
  std::size_t occupied = 0;
  for (std::uint8_t m : proj.scene.mask) occupied += m;
  CHECK(occupied == cloud.points.size());  // zero collisions
}

TEST_CASE("reflectance is class-keyed with a small deterministic jitter") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  PointCloud a = synthesize(w, s);
  PointCloud b = synthesize(w, s);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].reflectance == b.points[i].reflectance);  // deterministic
    CHECK(a.points[i].reflectance >= 0.0);
    CHECK(a.points[i].reflectance <= 1.0);
  }

  std::map<int, std::pair<double, double>> ranges;  // class -> (min, max)
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    auto [it, fresh] = ranges.try_emplace(a.labels[i], a.points[i].reflectance,
                                          a.points[i].reflectance);
    if (!fresh) {
      it->second.first = std::min(it->second.first, a.points[i].reflectance);
      it->second.second = std::max(it->second.second, a.points[i].reflectance);
    }
  }
  REQUIRE(ranges.size() >= 3);
  // Jitter band is narrow around each class constant...
  for (const auto& [cls, mm] : ranges) CHECK(mm.second - mm.first <= 0.16);
  // ...and the class bands do not all coincide.
  std::vector<double> mids;
  for (const auto& [cls, mm] : ranges) mids.push_back((mm.first + mm.second) / 2);
  double spread = *std::max_element(mids.begin(), mids.end()) -
                  *std::min_element(mids.begin(), mids.end());
  CHECK(spread > 0.1);
}

TEST_CASE("single box in view forms one contiguous blob") {
  SensorConfig s = synth_sensor();
  WorldSpec w;
  w.ground_z = -1.5;
  w.num_classes = 2;
  w.seed = 7;
  w.boxes.push_back({{10.0, 0.0, 0.0}, {4.0, 4.0, 2.0}, 1});
  PointCloud cloud = synthesize(w, s);
  auto proj = project_cloud(cloud, s, 2, default_palette(2));
  REQUIRE(proj.semantics.has_value());
  const SemanticMap& map = *proj.semantics;

  // Collect box pixels (class 1 with mask set).
  std::vector<std::pair<int, int>> box_px;
  for (int r = 0; r < s.height_px; ++r)
    for (int c = 0; c < s.width_px; ++c)
      if (proj.scene.mask[proj.scene.index(r, c)] && map.at(r, c) == 1)
        box_px.emplace_back(r, c);
  REQUIRE(box_px.size() > 10);

  // 4-neighbor flood fill from the first box pixel must reach all of them.
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(s.height_px) * s.width_px, 0);
  auto is_box = [&](int r, int c) {
    if (r < 0 || r >= s.height_px || c < 0 || c >= s.width_px) return false;
    return proj.scene.mask[proj.scene.index(r, c)] != 0 && map.at(r, c) == 1;
  };
  std::deque<std::pair<int, int>> queue{box_px[0]};
  seen[box_px[0].first * s.width_px + box_px[0].second] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    ++reached;
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (!is_box(nr, nc)) continue;
      std::uint8_t& flag = seen[static_cast<std::size_t>(nr) * s.width_px + nc];
      if (flag) continue;
      flag = 1;
      queue.emplace_back(nr, nc);
    }
  }
  CHECK(reached == box_px.size());
}

TEST_CASE("world without boxes only returns ground below the horizon") {
  SensorConfig s = synth_sensor();
  WorldSpec w;
  w.ground_z = -1.5;
  w.num_classes = 1;
  w.boxes.clear();
  PointCloud cloud = synthesize(w, s);
  std::size_t expected = 0;
  for (int r = 0; r < s.height_px; ++r) {
    double el = elevation_center(s, r);
    if (el >= 0.0) continue;  // horizontal and upward rays miss
    double t = -w.ground_z / std::sin(-el);
    if (t <= s.max_depth) expected += s.width_px;
  }
  CHECK(cloud.points.size() == expected);
  for (int label : cloud.labels) CHECK(label == 0);
}

TEST_CASE("corpus reproduces the base world at index zero") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  auto single = corpus(1, w, s, 31337);
  REQUIRE(single.size() == 1);
  PointCloud direct = synthesize(w, s);
  REQUIRE(single[0].cloud.points.size() == direct.points.size());
  for (std::size_t i = 0; i < direct.points.size(); ++i) {
    CHECK(single[0].cloud.points[i].x == direct.points[i].x);
    CHECK(single[0].cloud.points[i].y == direct.points[i].y);
    CHECK(single[0].cloud.points[i].z == direct.points[i].z);
  }
  CHECK(single[0].cloud.labels == direct.labels);
}

TEST_CASE("corpus jitter is deterministic and keeps boxes above ground") {
  SensorConfig s = synth_sensor();
  WorldSpec w = demo_world();
  auto a = corpus(4, w, s, 777);
  auto b = corpus(4, w, s, 777);
  REQUIRE(a.size() == 4);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(a[i].cloud.points.size() == b[i].cloud.points.size());
    for (std::size_t k = 0; k < a[i].cloud.points.size(); ++k) {
      CHECK(a[i].cloud.points[k].x == b[i].cloud.points[k].x);
      CHECK(a[i].cloud.points[k].z == b[i].cloud.points[k].z);
    }
  }
  // Different seed, different jitter.
  auto c = corpus(4, w, s, 778);
  bool any_differs = false;
  for (int i = 1; i < 4 && !any_differs; ++i)
    any_differs = c[i].world.boxes[0].center != a[i].world.boxes[0].center;
  CHECK(any_differs);
  // Jittered worlds actually move boxes but never sink them.
  for (int i = 1; i < 4; ++i) {
    CHECK(a[i].world.boxes[0].center != w.boxes[0].center);
    for (const Box& box : a[i].world.boxes)
      CHECK(box.center[2] - box.size[2] / 2.0 >= w.ground_z - 1e-9);
  }
}

TEST_CASE("world validation rejects bad specs") {
  WorldSpec sunk = demo_world();
  sunk.boxes[0].center[2] = sunk.ground_z - 5.0;
  CHECK_THROWS_AS(validate(sunk), UsageError);

  WorldSpec bad_class = demo_world();
  bad_class.boxes[0].class_id = 7;  // >= num_classes
  CHECK_THROWS_AS(validate(bad_class), UsageError);

  WorldSpec swallows = demo_world();
  swallows.boxes[0].center = {0.0, 0.0, 0.0};  // origin inside the box
  CHECK_THROWS_AS(validate(swallows), UsageError);

  WorldSpec flat = demo_world();
  flat.boxes[0].size[1] = 0.0;
  CHECK_THROWS_AS(validate(flat), UsageError);
}

TEST_SUITE_END();
