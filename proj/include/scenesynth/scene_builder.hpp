#pragma once

#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/common.hpp"
#include "scenesynth/layout_solver.hpp"
#include "scenesynth/mesh.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace scenesynth {

/// Canonicalized meshes keyed by asset id, loaded on first use. Safe for
/// concurrent readers.
class MeshLibrary {
 public:
  explicit MeshLibrary(const AssetCatalog& catalog) : catalog_(&catalog) {}

  const TriangleMesh& get(const std::string& asset_id) const {
    {
      std::shared_lock lock(mutex_);
      auto it = meshes_.find(asset_id);
      if (it != meshes_.end()) return *it->second;
    }
    auto mesh = std::make_unique<TriangleMesh>(load_mesh(*catalog_, catalog_->at(asset_id)));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = meshes_.try_emplace(asset_id, std::move(mesh));
    return *it->second;
  }

  void insert(const std::string& asset_id, TriangleMesh mesh) {
    std::unique_lock lock(mutex_);
    meshes_[asset_id] = std::make_unique<TriangleMesh>(std::move(mesh));
  }

  const AssetCatalog& catalog() const { return *catalog_; }

 private:
  const AssetCatalog* catalog_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, std::unique_ptr<TriangleMesh>> meshes_;
};

/// One group's solved layout, tagged with the asset each object id stands for.
struct SceneLayout {
  LayoutSolution floor;
  LayoutSolution wall;
  std::vector<LayoutSolution> supported;
  std::map<std::string, std::string> asset_of;  // object id -> asset id

  /// All placements in instance order: floor, wall, then supported groups.
  std::vector<const Placement*> ordered() const {
    std::vector<const Placement*> out;
    for (const auto& p : floor.placements) out.push_back(&p);
    for (const auto& p : wall.placements) out.push_back(&p);
    for (const auto& s : supported) {
      for (const auto& p : s.placements) out.push_back(&p);
    }
    return out;
  }
};

struct SceneInstance {
  std::uint32_t instance_id = 0;
  std::string object_id;
  std::string asset_id;
  std::string class_name;
  SurfaceKind surface_kind = SurfaceKind::floor;
  int surface_index = 0;
  Vec3 dims = Vec3::Ones();
  RigidTransform world_transform;
};

struct SceneMesh {
  TriangleMesh mesh;
  std::vector<std::uint32_t> triangle_instance;  // 0 = structure

  void validate(std::size_t instance_count) const {
    if (triangle_instance.size() != mesh.triangles.size()) {
      throw AssemblyError("per-triangle label count does not match triangle count");
    }
    for (auto id : triangle_instance) {
      if (id > instance_count) throw AssemblyError(fmt::format("label {} has no instance", id));
    }
  }
};

struct BuildOptions {
  bool ceiling = false;
};

/// Deterministic pseudo-random color for an instance.
inline Vec3 instance_color(std::uint32_t instance_id) {
  if (instance_id == 0) return Vec3(0.75, 0.75, 0.72);
  const std::uint64_t h = hash64(0xC010u, instance_id);
  return Vec3(0.2 + 0.8 * ((h >> 0) & 0xFF) / 255.0, 0.2 + 0.8 * ((h >> 8) & 0xFF) / 255.0,
              0.2 + 0.8 * ((h >> 16) & 0xFF) / 255.0);
}

/// Floor and four walls (plus optional ceiling), facing into the room.
inline TriangleMesh room_shell(const RoomSpec& room, bool ceiling) {
  const double W = room.width, D = room.depth, H = room.height;
  using primitives::quad;
  TriangleMesh shell = primitives::merge({
      quad({0, 0, 0}, {W, 0, 0}, {W, D, 0}, {0, D, 0}),  // floor
      quad({0, 0, 0}, {0, 0, H}, {W, 0, H}, {W, 0, 0}),  // south
      quad({W, 0, 0}, {W, 0, H}, {W, D, H}, {W, D, 0}),  // east
      quad({W, D, 0}, {W, D, H}, {0, D, H}, {0, D, 0}),  // north
      quad({0, D, 0}, {0, D, H}, {0, 0, H}, {0, 0, 0}),  // west
  });
  if (ceiling) shell.append(quad({0, 0, H}, {0, D, H}, {W, D, H}, {W, 0, H}));
  primitives::paint(shell, instance_color(0));
  return shell;
}

inline std::vector<SceneInstance> scene_instances(const SceneLayout& layout,
                                                  const AssetCatalog& catalog) {
  std::vector<SceneInstance> out;
  std::uint32_t next = 1;
  for (const Placement* p : layout.ordered()) {
    auto it = layout.asset_of.find(p->object_id);
    if (it == layout.asset_of.end()) {
      throw AssemblyError(fmt::format("no asset recorded for object '{}'", p->object_id));
    }
    const auto& rec = catalog.at(it->second);
    out.push_back({next++, p->object_id, rec.asset_id, rec.class_name, p->surface_kind,
                   p->surface_index, rec.target_dims, p->world_transform});
  }
  return out;
}

/// Assembles the labeled scene mesh from instances: structure triangles get
/// id 0, each instance its own id.
inline SceneMesh assemble_scene(const RoomSpec& room, const std::vector<SceneInstance>& instances,
                                const MeshLibrary& meshes, const BuildOptions& options = {}) {
  room.validate();
  SceneMesh scene;
  scene.mesh = room_shell(room, options.ceiling);
  scene.triangle_instance.assign(scene.mesh.triangles.size(), 0);

  const Aabb bounds = room.box().inflated(1e-6);
  for (const auto& inst : instances) {
    TriangleMesh m = meshes.get(inst.asset_id);
    m.transform(inst.world_transform);
    if (!bounds.contains(m.bounds())) {
      throw AssemblyError(fmt::format("instance {} ('{}') extends outside the room", inst.instance_id,
                                      inst.object_id));
    }
    if (!m.has_colors()) primitives::paint(m, instance_color(inst.instance_id));
    scene.mesh.append(m);
    scene.triangle_instance.resize(scene.mesh.triangles.size(), inst.instance_id);
  }
  scene.validate(instances.size());
  return scene;
}

/// Assembles a solved layout; instance ids follow SceneLayout::ordered().
inline std::pair<SceneMesh, std::vector<SceneInstance>> build_scene(
    const RoomSpec& room, const SceneLayout& layout, const MeshLibrary& meshes,
    const BuildOptions& options = {}) {
  auto instances = scene_instances(layout, meshes.catalog());
  auto scene = assemble_scene(room, instances, meshes, options);
  return {std::move(scene), std::move(instances)};
}

/// Debug export: OBJ plus a JSON sidecar with the triangle -> instance map.
inline void export_scene_mesh(const std::filesystem::path& obj_path, const SceneMesh& scene,
                              const std::vector<SceneInstance>& instances) {
  write_obj(obj_path, scene.mesh);
  nlohmann::json side;
  side["triangle_instance"] = scene.triangle_instance;
  auto& arr = side["instances"] = nlohmann::json::array();
  for (const auto& i : instances) {
    arr.push_back({{"instance_id", i.instance_id}, {"asset_id", i.asset_id}, {"class_name", i.class_name}});
  }
  std::filesystem::path json_path = obj_path;
  json_path.replace_extension(".json");
  std::ofstream(json_path) << side.dump();
}

}  // namespace scenesynth
