#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/layout_solver.hpp"
#include "scenesynth/scene_builder.hpp"
#include "scenesynth/virtual_scanner.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace scenesynth {

inline constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

// ---------------------------------------------------------------------------
// Binary PLY: float x,y,z; uchar red,green,blue; uint instance_id.

inline constexpr std::size_t kPlyRecordBytes = 3 * 4 + 3 + 4;

inline std::string ply_header(std::size_t vertex_count) {
  return fmt::format(
      "ply\nformat binary_little_endian 1.0\nelement vertex {}\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property uint instance_id\nend_header\n",
      vertex_count);
}

inline std::vector<std::uint8_t> encode_ply(const LabeledPointCloud& cloud) {
  cloud.validate();
  const std::string header = ply_header(cloud.size());
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + cloud.size() * kPlyRecordBytes);
  std::uint8_t rec[kPlyRecordBytes];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const float f = static_cast<float>(cloud.points[i][a]);
      std::memcpy(rec + 4 * a, &f, 4);
    }
    const auto rgb = cloud.colors.empty() ? std::array<std::uint8_t, 3>{0, 0, 0} : cloud.colors[i];
    rec[12] = rgb[0];
    rec[13] = rgb[1];
    rec[14] = rgb[2];
    std::memcpy(rec + 15, &cloud.instance_ids[i], 4);
    out.insert(out.end(), rec, rec + kPlyRecordBytes);
  }
  return out;
}

inline LabeledPointCloud decode_ply(const std::vector<std::uint8_t>& bytes) {
  // Header: read line by line, tracking byte offsets for diagnostics.
  std::size_t pos = 0;
  auto next_line = [&]() -> std::pair<std::string, std::size_t> {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw FormatError(fmt::format("PLY: unterminated header at byte {}", start));
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    return {line, start};
  };
  const std::vector<std::string> expected_props = {
      "property float x",   "property float y",    "property float z",          "property uchar red",
      "property uchar green", "property uchar blue", "property uint instance_id"};

  auto [magic, off0] = next_line();
  if (magic != "ply") throw FormatError(fmt::format("PLY: bad magic at byte {}", off0));
  auto [fmt_line, off1] = next_line();
  if (fmt_line != "format binary_little_endian 1.0") {
    throw FormatError(fmt::format("PLY: unsupported format '{}' at byte {}", fmt_line, off1));
  }
  auto [elem, off2] = next_line();
  std::size_t count = 0;
  {
    std::istringstream is(elem);
    std::string kw, name;
    if (!(is >> kw >> name >> count) || kw != "element" || name != "vertex") {
      throw FormatError(fmt::format("PLY: expected 'element vertex N' at byte {}", off2));
    }
  }
  for (const auto& want : expected_props) {
    auto [line, off] = next_line();
    if (line != want) {
      throw FormatError(fmt::format("PLY: expected '{}' but found '{}' at byte {}", want, line, off));
    }
  }
  auto [end, off3] = next_line();
  if (end != "end_header") throw FormatError(fmt::format("PLY: expected end_header at byte {}", off3));

  const std::size_t need = count * kPlyRecordBytes;
  if (bytes.size() - pos != need) {
    throw FormatError(fmt::format("PLY: body at byte {} holds {} bytes, expected {} for {} vertices", pos,
                                  bytes.size() - pos, need, count));
  }
  LabeledPointCloud cloud;
  cloud.points.resize(count);
  cloud.instance_ids.resize(count);
  cloud.colors.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* rec = bytes.data() + pos + i * kPlyRecordBytes;
    for (int a = 0; a < 3; ++a) {
      float f;
      std::memcpy(&f, rec + 4 * a, 4);
      cloud.points[i][a] = f;
    }
    cloud.colors[i] = {rec[12], rec[13], rec[14]};
    std::memcpy(&cloud.instance_ids[i], rec + 15, 4);
  }
  return cloud;
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_ply(const std::filesystem::path& path, const LabeledPointCloud& cloud) {
  write_file(path, encode_ply(cloud));
}

inline LabeledPointCloud read_ply(const std::filesystem::path& path) {
  try {
    return decode_ply(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

/// Rounds every coordinate to float precision, which is what a PLY round
/// trip preserves.
inline LabeledPointCloud quantize_to_float(LabeledPointCloud cloud) {
  // Flat loop over the coordinate array. GCC 11 at -O3 vectorizes the
  // per-point form wrongly and skips the tail points.
  static_assert(sizeof(Vec3) == 3 * sizeof(double));
  double* d = cloud.points.empty() ? nullptr : cloud.points.data()->data();
  for (std::size_t k = 0; k < 3 * cloud.points.size(); ++k) d[k] = static_cast<float>(d[k]);
  return cloud;
}

// ---------------------------------------------------------------------------
// JSON helpers

/// Parses JSON text; syntax errors report the byte offset.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(fmt::format("{}: JSON parse error at byte {}: {}", what, e.byte, e.what()));
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open '{}'", path.string()));
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_json_text(text, path.string());
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  const std::string s = j.dump(2) + "\n";
  write_file(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

inline void check_format_version(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw FormatError(fmt::format("{}: missing format_version", what));
  }
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kFormatVersion) {
    throw FormatError(fmt::format("{}: format_version {} is not supported (expected {})", what,
                                  j["format_version"].dump(), kFormatVersion));
  }
}

template <typename T>
T json_get(const nlohmann::json& j, const char* key, const std::string& what) {
  if (!j.contains(key)) throw FormatError(fmt::format("{}: missing key '{}'", what, key));
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: bad value for '{}': {}", what, key, e.what()));
  }
}

inline nlohmann::json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 vec3_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(fmt::format("{}: expected a 3-vector", what));
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// Row-major 4x4 matrix.
inline nlohmann::json transform_json(const RigidTransform& t) {
  const Mat4 m = t.matrix();
  nlohmann::json arr = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
  }
  return arr;
}

inline RigidTransform transform_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 16) throw FormatError(fmt::format("{}: transform must hold 16 numbers", what));
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = j[static_cast<std::size_t>(4 * r + c)].get<double>();
  }
  return RigidTransform::from_matrix(m);
}

inline SurfaceKind parse_surface_kind(std::string_view s) {
  if (s == "floor") return SurfaceKind::floor;
  if (s == "wall") return SurfaceKind::wall;
  if (s == "support") return SurfaceKind::support;
  throw FormatError(fmt::format("unknown surface kind '{}'", s));
}

// ---------------------------------------------------------------------------
// Scene sample

struct InstanceRecord {
  std::uint32_t instance_id = 0;
  std::string object_id;
  std::string class_name;
  std::string asset_id;
  SurfaceKind surface_kind = SurfaceKind::floor;
  int surface_index = 0;
  Vec3 dims = Vec3::Ones();
  RigidTransform transform;
  std::size_t point_count = 0;

  bool operator==(const InstanceRecord&) const = default;
};

struct SceneSample {
  std::string scene_id;
  std::uint64_t seed = 0;
  RoomSpec room;
  std::vector<InstanceRecord> instances;
  nlohmann::json meta = nlohmann::json::object();  // free-form scene report
};

inline std::vector<InstanceRecord> instance_records(const std::vector<SceneInstance>& instances,
                                                    const LabeledPointCloud& cloud) {
  std::map<std::uint32_t, std::size_t> counts;
  for (auto id : cloud.instance_ids) ++counts[id];
  std::vector<InstanceRecord> out;
  for (const auto& i : instances) {
    out.push_back({i.instance_id, i.object_id, i.class_name, i.asset_id, i.surface_kind, i.surface_index,
                   i.dims, i.world_transform, counts.count(i.instance_id) ? counts[i.instance_id] : 0});
  }
  return out;
}

inline nlohmann::json instances_to_json(const SceneSample& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& i : s.instances) {
    arr.push_back({{"instance_id", i.instance_id},
                   {"object_id", i.object_id},
                   {"class_name", i.class_name},
                   {"asset_id", i.asset_id},
                   {"surface", to_string(i.surface_kind)},
                   {"surface_index", i.surface_index},
                   {"dims", vec3_json(i.dims)},
                   {"transform", transform_json(i.transform)},
                   {"point_count", i.point_count}});
  }
  return {{"format_version", kFormatVersion},
          {"scene_id", s.scene_id},
          {"seed", s.seed},
          {"room", {s.room.width, s.room.depth, s.room.height}},
          {"instances", arr}};
}

inline void instances_from_json(const nlohmann::json& j, SceneSample& s, const std::string& what) {
  check_format_version(j, what);
  s.scene_id = json_get<std::string>(j, "scene_id", what);
  s.seed = json_get<std::uint64_t>(j, "seed", what);
  const Vec3 room = vec3_from_json(j.at("room"), what + " room");
  s.room = {room.x(), room.y(), room.z()};
  s.instances.clear();
  for (const auto& e : json_get<nlohmann::json>(j, "instances", what)) {
    InstanceRecord r;
    r.instance_id = json_get<std::uint32_t>(e, "instance_id", what);
    r.object_id = json_get<std::string>(e, "object_id", what);
    r.class_name = json_get<std::string>(e, "class_name", what);
    r.asset_id = json_get<std::string>(e, "asset_id", what);
    r.surface_kind = parse_surface_kind(json_get<std::string>(e, "surface", what));
    r.surface_index = json_get<int>(e, "surface_index", what);
    r.dims = vec3_from_json(e.at("dims"), what);
    r.transform = transform_from_json(e.at("transform"), what);
    r.point_count = json_get<std::size_t>(e, "point_count", what);
    s.instances.push_back(std::move(r));
  }
}

struct ScenePaths {
  std::filesystem::path dir;
  std::filesystem::path points() const { return dir / "points.ply"; }
  std::filesystem::path instances() const { return dir / "instances.json"; }
  std::filesystem::path meta() const { return dir / "meta.json"; }
};

/// Writes points.ply, instances.json and meta.json into `dir`.
inline void export_scene(const std::filesystem::path& dir, const SceneSample& sample,
                         const LabeledPointCloud& cloud) {
  std::filesystem::create_directories(dir);
  const ScenePaths p{dir};
  write_ply(p.points(), cloud);
  write_json_file(p.instances(), instances_to_json(sample));
  nlohmann::json meta = sample.meta;
  meta["format_version"] = kFormatVersion;
  meta["scene_id"] = sample.scene_id;
  write_json_file(p.meta(), meta);
}

struct LoadedScene {
  SceneSample sample;
  LabeledPointCloud cloud;
};

inline LoadedScene load_scene(const std::filesystem::path& dir) {
  const ScenePaths p{dir};
  LoadedScene out;
  instances_from_json(read_json_file(p.instances()), out.sample, p.instances().string());
  nlohmann::json meta = read_json_file(p.meta());
  check_format_version(meta, p.meta().string());
  out.sample.meta = std::move(meta);
  out.cloud = read_ply(p.points());
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct SceneEntry {
  std::string scene_id;
  std::string path;  // relative to the dataset root
  bool operator==(const SceneEntry&) const = default;
};

struct DatasetManifest {
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t master_seed = 0;
  std::vector<SceneEntry> scenes;
  std::vector<std::string> failed_scenes;
  double training_balance_alpha = 0.5;

  void validate() const {
    if (!(training_balance_alpha >= 0 && training_balance_alpha <= 1)) {
      throw InvalidArgument(fmt::format("training_balance_alpha {} must lie in [0, 1]", training_balance_alpha));
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json sc = nlohmann::json::array();
    for (const auto& s : scenes) sc.push_back({{"scene_id", s.scene_id}, {"path", s.path}});
    return {{"format_version", kFormatVersion},
            {"config", config},
            {"master_seed", master_seed},
            {"training_balance_alpha", training_balance_alpha},
            {"scenes", sc},
            {"failed_scenes", failed_scenes}};
  }

  static DatasetManifest from_json(const nlohmann::json& j, const std::string& what = "manifest") {
    check_format_version(j, what);
    DatasetManifest m;
    m.config = json_get<nlohmann::json>(j, "config", what);
    m.master_seed = json_get<std::uint64_t>(j, "master_seed", what);
    m.training_balance_alpha = json_get<double>(j, "training_balance_alpha", what);
    for (const auto& e : json_get<nlohmann::json>(j, "scenes", what)) {
      m.scenes.push_back({json_get<std::string>(e, "scene_id", what), json_get<std::string>(e, "path", what)});
    }
    if (j.contains("failed_scenes")) m.failed_scenes = json_get<std::vector<std::string>>(j, "failed_scenes", what);
    m.validate();
    return m;
  }
};

inline void export_manifest(const std::filesystem::path& root, const DatasetManifest& m) {
  m.validate();
  std::filesystem::create_directories(root);
  write_json_file(root / "manifest.json", m.to_json());
}

/// Loads and validates the manifest; every scene entry must resolve to an
/// existing directory holding the three scene files.
inline DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  DatasetManifest m = DatasetManifest::from_json(read_json_file(path), path.string());
  for (const auto& s : m.scenes) {
    const ScenePaths p{root / s.path};
    for (const auto& f : {p.points(), p.instances(), p.meta()}) {
      if (!std::filesystem::exists(f)) {
        throw FormatError(fmt::format("manifest scene '{}' is missing '{}'", s.scene_id, f.string()));
      }
    }
  }
  return m;
}

}  // namespace scenesynth
