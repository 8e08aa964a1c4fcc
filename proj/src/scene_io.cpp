#include "rvgen/scene_io.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <string>

namespace rvgen {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'R', 'V', 'S', '1'};

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_f32(std::string& out, double v) {
  float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  append_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = (static_cast<std::uint32_t>(byte(0))) |
                      (static_cast<std::uint32_t>(byte(1)) << 8) |
                      (static_cast<std::uint32_t>(byte(2)) << 16) |
                      (static_cast<std::uint32_t>(byte(3)) << 24);
    pos_ += 4;
    return v;
  }

  float f32() {
    std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  void expect_magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kMagic, 4) != 0)
      throw IoError(path_.string() + ": not an RVS file (bad magic)");
    pos_ += 4;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw IoError(path_.string() + ": truncated file");
  }

 private:
  unsigned char byte(std::size_t off) const {
    return static_cast<unsigned char>(bytes_[pos_ + off]);
  }
  const std::string& bytes_;
  fs::path path_;
  std::size_t pos_ = 0;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  if (in.bad()) throw IoError(path.string() + ": read failed");
  return bytes;
}

}  // namespace

void atomic_write_bytes(const fs::path& path, const std::string& bytes) {
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  // Unique sibling temp name, then rename into place.
  static std::mt19937_64 salt(std::random_device{}());
  fs::path tmp =
      dir / (path.filename().string() + ".tmp" + std::to_string(salt()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp.string() + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError(path.string() + ": rename failed: " + ec.message());
  }
}

void write_rvs(const fs::path& path, const RangeScene& scene,
               const SemanticMap* semantics, const PointCloud* exact_points,
               const std::vector<std::int32_t>* winner) {
  const SensorConfig& s = scene.sensor;
  std::size_t n = static_cast<std::size_t>(s.height_px) * s.width_px;
  if (scene.depth_log.size() != n || scene.reflectance.size() != n ||
      scene.mask.size() != n)
    throw UsageError("write_rvs: scene plane sizes do not match sensor");
  if (semantics) {
    validate(*semantics);
    if (semantics->height != s.height_px || semantics->width != s.width_px)
      throw UsageError("write_rvs: semantic map dimensions mismatch");
  }
  if ((exact_points != nullptr) != (winner != nullptr))
    throw UsageError("write_rvs: exact points and winner map go together");
  if (winner && winner->size() != n)
    throw UsageError("write_rvs: winner map size mismatch");

  std::uint32_t channels = 3;
  if (semantics) ++channels;
  if (exact_points) channels += 3;

  std::string out;
  out.reserve(20 + static_cast<std::size_t>(channels) * n * 4);
  out.append(kMagic, 4);
  append_u32(out, static_cast<std::uint32_t>(s.height_px));
  append_u32(out, static_cast<std::uint32_t>(s.width_px));
  append_u32(out, channels);
  append_u32(out, semantics ? static_cast<std::uint32_t>(semantics->num_classes) : 0u);

  for (std::size_t i = 0; i < n; ++i) append_f32(out, scene.depth_log[i]);
  // The file keeps reflectance in its physical [0,1] form. For a float32
  // source value r the stored plane is bit-identical to r: 2r-1 and back
  // are both exact in double, so cloud -> scene -> cloud round-trips.
  for (std::size_t i = 0; i < n; ++i)
    append_f32(out, signed_to_unit(scene.reflectance[i]));
  for (std::size_t i = 0; i < n; ++i) append_f32(out, scene.mask[i] ? 1.0 : 0.0);
  if (semantics)
    for (std::size_t i = 0; i < n; ++i)
      append_f32(out, static_cast<double>(semantics->class_ids[i]));
  if (exact_points) {
    for (int axis = 0; axis < 3; ++axis) {
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        if ((*winner)[i] >= 0) {
          const Point& p = exact_points->points[(*winner)[i]];
          v = axis == 0 ? p.x : axis == 1 ? p.y : p.z;
        }
        append_f32(out, v);
      }
    }
  }
  atomic_write_bytes(path, out);
}

RvsContent read_rvs(const fs::path& path, const SensorConfig& sensor) {
  validate(sensor);
  std::string bytes = slurp(path);
  ByteReader reader(bytes, path);
  reader.expect_magic();
  std::uint32_t height = reader.u32();
  std::uint32_t width = reader.u32();
  std::uint32_t channels = reader.u32();
  std::uint32_t num_classes = reader.u32();

  if (height == 0 || width == 0 || height > 1u << 16 || width > 1u << 16)
    throw IoError(path.string() + ": implausible dimensions in header");
  if (channels != 3 && channels != 4 && channels != 6 && channels != 7)
    throw IoError(path.string() + ": unsupported channel count " +
                  std::to_string(channels));
  bool has_classes = channels == 4 || channels == 7;
  bool has_exact = channels >= 6;
  if (has_classes != (num_classes > 0))
    throw IoError(path.string() + ": class plane and class count disagree");
  if (static_cast<int>(height) != sensor.height_px ||
      static_cast<int>(width) != sensor.width_px)
    throw IoError(path.string() + ": dimensions " + std::to_string(height) +
                  "x" + std::to_string(width) + " do not match the sensor config");

  std::size_t n = static_cast<std::size_t>(height) * width;
  RvsContent content;
  content.scene.sensor = sensor;
  content.scene.depth_log.resize(n);
  content.scene.reflectance.resize(n);
  content.scene.mask.resize(n);

  for (std::size_t i = 0; i < n; ++i) content.scene.depth_log[i] = reader.f32();
  for (std::size_t i = 0; i < n; ++i) {
    float v = reader.f32();
    if (!(v >= 0.0f) || v > 1.0f)
      throw IoError(path.string() + ": reflectance plane value outside [0,1]");
    content.scene.reflectance[i] = rescale_to_signed(v);
  }
  for (std::size_t i = 0; i < n; ++i) content.scene.mask[i] = reader.f32() != 0.0f;
  if (has_classes) {
    SemanticMap map;
    map.height = static_cast<int>(height);
    map.width = static_cast<int>(width);
    map.num_classes = static_cast<int>(num_classes);
    map.palette = default_palette(map.num_classes);
    map.class_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      float v = reader.f32();
      int id = static_cast<int>(v);
      if (static_cast<float>(id) != v || id < 0 || id >= map.num_classes)
        throw IoError(path.string() + ": invalid class id " + std::to_string(v));
      map.class_ids[i] = id;
    }
    content.semantics = std::move(map);
  }
  if (has_exact) {
    content.exact_x.emplace(n);
    content.exact_y.emplace(n);
    content.exact_z.emplace(n);
    for (std::size_t i = 0; i < n; ++i) (*content.exact_x)[i] = reader.f32();
    for (std::size_t i = 0; i < n; ++i) (*content.exact_y)[i] = reader.f32();
    for (std::size_t i = 0; i < n; ++i) (*content.exact_z)[i] = reader.f32();
  }
  if (!reader.exhausted())
    throw IoError(path.string() + ": trailing bytes after payload");
  return content;
}

PointCloud rvs_to_cloud(const RvsContent& content) {
  if (!content.exact_x) {
    if (content.semantics) return unproject_scene(content.scene, *content.semantics);
    return unproject_scene(content.scene);
  }
  // Exact planes: emit the preserved source coordinates in pixel order.
  const RangeScene& scene = content.scene;
  PointCloud cloud;
  std::size_t n = scene.mask.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.mask[i]) continue;
    Point p;
    p.x = (*content.exact_x)[i];
    p.y = (*content.exact_y)[i];
    p.z = (*content.exact_z)[i];
    p.reflectance = signed_to_unit(scene.reflectance[i]);
    cloud.points.push_back(p);
    if (content.semantics) cloud.labels.push_back(content.semantics->class_ids[i]);
  }
  return cloud;
}

PointCloud read_kitti_bin(const fs::path& bin_path) {
  std::string bytes = slurp(bin_path);
  if (bytes.size() % 16 != 0)
    throw IoError(bin_path.string() + ": size is not a multiple of 16 bytes");
  ByteReader reader(bytes, bin_path);
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / 16);
  while (!reader.exhausted()) {
    Point p;
    p.x = reader.f32();
    p.y = reader.f32();
    p.z = reader.f32();
    double refl = reader.f32();
    // Uphold the [0,1] reflectance invariant on ingest.
    p.reflectance = refl < 0.0 ? 0.0 : refl > 1.0 ? 1.0 : refl;
    cloud.points.push_back(p);
  }
  return cloud;
}

void read_kitti_labels(const fs::path& label_path, PointCloud& cloud) {
  std::string bytes = slurp(label_path);
  if (bytes.size() % 4 != 0)
    throw IoError(label_path.string() + ": size is not a multiple of 4 bytes");
  std::size_t count = bytes.size() / 4;
  if (count != cloud.points.size())
    throw IoError(label_path.string() + ": " + std::to_string(count) +
                  " labels for " + std::to_string(cloud.points.size()) + " points");
  ByteReader reader(bytes, label_path);
  cloud.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Semantic class lives in the low 16 bits; the high half is instance id.
    cloud.labels[i] = static_cast<int>(reader.u32() & 0xffffu);
  }
}

void write_kitti_bin(const fs::path& bin_path, const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.points.size() * 16);
  for (const Point& p : cloud.points) {
    append_f32(out, p.x);
    append_f32(out, p.y);
    append_f32(out, p.z);
    append_f32(out, p.reflectance);
  }
  atomic_write_bytes(bin_path, out);
}

void write_kitti_labels(const fs::path& label_path, const PointCloud& cloud) {
  if (!cloud.labeled())
    throw UsageError("write_kitti_labels: cloud has no labels");
  if (cloud.labels.size() != cloud.points.size())
    throw UsageError("write_kitti_labels: label count mismatch");
  std::string out;
  out.reserve(cloud.labels.size() * 4);
  for (int label : cloud.labels) {
    if (label < 0 || label > 0xffff)
      throw UsageError("write_kitti_labels: label outside uint16 range");
    append_u32(out, static_cast<std::uint32_t>(label));
  }
  atomic_write_bytes(label_path, out);
}

}  // namespace rvgen
