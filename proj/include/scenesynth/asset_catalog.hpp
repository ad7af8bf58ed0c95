#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace scenesynth {

enum class Group { floor, wall, obj };

inline constexpr std::array<Group, 3> kAllGroups = {Group::floor, Group::wall, Group::obj};

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::floor: return "floor";
    case Group::wall: return "wall";
    case Group::obj: return "obj";
  }
  return "?";
}

inline Group parse_group(std::string_view s) {
  if (s == "floor") return Group::floor;
  if (s == "wall") return Group::wall;
  if (s == "obj") return Group::obj;
  throw CatalogError(fmt::format("unknown group '{}'", s));
}

/// Horizontal axis an asset's front faces in its source file.
enum class FrontAxis { pos_x, neg_x, pos_y, neg_y };

inline std::string_view to_string(FrontAxis a) {
  switch (a) {
    case FrontAxis::pos_x: return "+x";
    case FrontAxis::neg_x: return "-x";
    case FrontAxis::pos_y: return "+y";
    case FrontAxis::neg_y: return "-y";
  }
  return "?";
}

inline FrontAxis parse_front_axis(std::string_view s) {
  if (s == "+x") return FrontAxis::pos_x;
  if (s == "-x") return FrontAxis::neg_x;
  if (s == "+y") return FrontAxis::pos_y;
  if (s == "-y") return FrontAxis::neg_y;
  throw CatalogError(fmt::format("unknown front_axis '{}'", s));
}

/// Quarter turns about +z that carry `axis` onto the canonical forward +y.
inline int quarter_turns_to_forward(FrontAxis axis) {
  switch (axis) {
    case FrontAxis::pos_y: return 0;
    case FrontAxis::pos_x: return 1;
    case FrontAxis::neg_y: return 2;
    case FrontAxis::neg_x: return 3;
  }
  return 0;
}

struct AssetRecord {
  std::string asset_id;
  std::string class_name;
  Group group = Group::obj;
  std::string mesh_path;  // as written in the manifest (relative to it)
  Vec3 target_dims = Vec3::Ones();
  FrontAxis front_axis = FrontAxis::pos_y;

  bool operator==(const AssetRecord& o) const {
    return asset_id == o.asset_id && class_name == o.class_name && group == o.group &&
           mesh_path == o.mesh_path && target_dims == o.target_dims &&
           front_axis == o.front_axis;
  }
};

inline void to_json(nlohmann::json& j, const AssetRecord& r) {
  j = nlohmann::json{{"asset_id", r.asset_id},
                     {"class_name", r.class_name},
                     {"group", to_string(r.group)},
                     {"mesh_path", r.mesh_path},
                     {"target_dims", {r.target_dims.x(), r.target_dims.y(), r.target_dims.z()}},
                     {"front_axis", to_string(r.front_axis)}};
}

inline AssetRecord record_from_json(const nlohmann::json& j) {
  AssetRecord r;
  try {
    r.asset_id = j.at("asset_id").get<std::string>();
    r.class_name = j.at("class_name").get<std::string>();
    r.group = parse_group(j.at("group").get<std::string>());
    r.mesh_path = j.at("mesh_path").get<std::string>();
    const auto& dims = j.at("target_dims");
    if (!dims.is_array() || dims.size() != 3) {
      throw CatalogError(fmt::format("asset '{}': target_dims must have 3 entries", r.asset_id));
    }
    r.target_dims = Vec3(dims[0].get<double>(), dims[1].get<double>(), dims[2].get<double>());
    r.front_axis = parse_front_axis(j.value("front_axis", std::string("+y")));
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError(fmt::format("malformed asset record: {}", e.what()));
  }
  if (!(r.target_dims.array() > 0.0).all() || !r.target_dims.allFinite()) {
    throw CatalogError(fmt::format("asset '{}': target_dims must be positive", r.asset_id));
  }
  return r;
}

/// Immutable, validated asset base indexed by group and class. Record ids are
/// positions in `records()`.
class AssetCatalog {
 public:
  AssetCatalog() = default;

  AssetCatalog(std::vector<AssetRecord> records, std::filesystem::path base_dir)
      : records_(std::move(records)), base_dir_(std::move(base_dir)) {
    std::set<std::string> seen;
    std::vector<std::string> dups;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!seen.insert(r.asset_id).second) dups.push_back(r.asset_id);
      by_group_[r.group].push_back(i);
      by_class_[r.class_name].push_back(i);
      by_id_[r.asset_id] = i;
    }
    if (!dups.empty()) {
      throw CatalogError(fmt::format("duplicate asset_id: {}", fmt::join(dups, ", ")));
    }
  }

  const std::vector<AssetRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const AssetRecord& operator[](std::size_t id) const { return records_.at(id); }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  const std::vector<std::size_t>& group(Group g) const {
    static const std::vector<std::size_t> kEmpty;
    auto it = by_group_.find(g);
    return it == by_group_.end() ? kEmpty : it->second;
  }

  const std::vector<std::size_t>& by_class(const std::string& cls) const {
    static const std::vector<std::size_t> kEmpty;
    auto it = by_class_.find(cls);
    return it == by_class_.end() ? kEmpty : it->second;
  }

  const std::map<std::string, std::vector<std::size_t>>& classes() const { return by_class_; }

  std::optional<std::size_t> find(const std::string& asset_id) const {
    auto it = by_id_.find(asset_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  const AssetRecord& at(const std::string& asset_id) const {
    auto id = find(asset_id);
    if (!id) throw CatalogError(fmt::format("unknown asset_id '{}'", asset_id));
    return records_[*id];
  }

  std::filesystem::path mesh_file(const AssetRecord& r) const {
    const std::filesystem::path p(r.mesh_path);
    return p.is_absolute() ? p : base_dir_ / p;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records_) arr.push_back(r);
    return arr;
  }

 private:
  std::vector<AssetRecord> records_;
  std::filesystem::path base_dir_;
  std::map<Group, std::vector<std::size_t>> by_group_;
  std::map<std::string, std::vector<std::size_t>> by_class_;
  std::map<std::string, std::size_t> by_id_;
};

inline AssetCatalog parse_catalog(const nlohmann::json& manifest,
                                  const std::filesystem::path& base_dir) {
  if (!manifest.is_array()) throw CatalogError("asset manifest must be a JSON array");
  std::vector<AssetRecord> records;
  records.reserve(manifest.size());
  for (const auto& j : manifest) records.push_back(record_from_json(j));
  return AssetCatalog(std::move(records), base_dir);
}

/// Loads and validates an asset manifest. Every referenced mesh must exist.
inline AssetCatalog load_catalog(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw CatalogError(fmt::format("cannot open asset manifest '{}'", manifest_path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CatalogError(fmt::format("asset manifest '{}' is not valid JSON: {}",
                                   manifest_path.string(), e.what()));
  }
  auto catalog = parse_catalog(j, manifest_path.parent_path());
  std::vector<std::string> missing;
  for (const auto& r : catalog.records()) {
    if (!std::filesystem::exists(catalog.mesh_file(r))) missing.push_back(r.asset_id);
  }
  if (!missing.empty()) {
    throw CatalogError(fmt::format("missing mesh files for assets: {}", fmt::join(missing, ", ")));
  }
  return catalog;
}

/// Brings raw asset geometry into the canonical frame (z-up, +y forward):
/// front rotated onto +y, AABB rescaled to `target_dims`, centered in x/y with
/// its base at z = 0. Zero-area triangles are dropped.
inline TriangleMesh canonicalize_mesh(TriangleMesh mesh, const AssetRecord& record) {
  mesh.validate();
  mesh.drop_degenerate();
  if (mesh.empty()) throw FormatError(fmt::format("asset '{}': mesh is empty", record.asset_id));

  const RigidTransform turn{quarter_turn_rotation(quarter_turns_to_forward(record.front_axis)),
                            Vec3::Zero()};
  mesh.transform(turn);

  const Aabb box = mesh.bounds();
  const Vec3 size = box.size();
  for (int a = 0; a < 3; ++a) {
    if (!(size[a] > 0.0)) {
      throw FormatError(fmt::format("asset '{}': mesh has zero extent along axis {}",
                                    record.asset_id, a));
    }
  }
  const Vec3 scale = record.target_dims.cwiseQuotient(size);
  const Vec3 center = box.center();
  for (auto& v : mesh.vertices) {
    Vec3 p = (v - center).cwiseProduct(scale);
    p.z() += 0.5 * record.target_dims.z();
    v = p;
  }
  // Snap the extremes so the box is exact despite round-off.
  const Aabb out = mesh.bounds();
  const Vec3 lo(-0.5 * record.target_dims.x(), -0.5 * record.target_dims.y(), 0.0);
  const Vec3 hi(0.5 * record.target_dims.x(), 0.5 * record.target_dims.y(), record.target_dims.z());
  for (auto& v : mesh.vertices) {
    for (int a = 0; a < 3; ++a) {
      if (v[a] == out.min[a]) v[a] = lo[a];
      if (v[a] == out.max[a]) v[a] = hi[a];
    }
  }
  return mesh;
}

inline TriangleMesh load_mesh(const AssetRecord& record, const std::filesystem::path& base_dir = {}) {
  const std::filesystem::path p(record.mesh_path);
  return canonicalize_mesh(read_obj(p.is_absolute() || base_dir.empty() ? p : base_dir / p), record);
}

inline TriangleMesh load_mesh(const AssetCatalog& catalog, const AssetRecord& record) {
  return canonicalize_mesh(read_obj(catalog.mesh_file(record)), record);
}

}  // namespace scenesynth
