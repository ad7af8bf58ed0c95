#pragma once

#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/common.hpp"
#include "scenesynth/dataset_io.hpp"
#include "scenesynth/geometry_features.hpp"
#include "scenesynth/http_backends.hpp"
#include "scenesynth/layout_solver.hpp"
#include "scenesynth/metrics.hpp"
#include "scenesynth/object_selection.hpp"
#include "scenesynth/relations.hpp"
#include "scenesynth/scene_builder.hpp"
#include "scenesynth/virtual_scanner.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace scenesynth {

// ---------------------------------------------------------------------------
// Configuration

struct ClusterRestrictionConfig {
  std::size_t k = 5;
  std::set<int> allowed;
  std::uint64_t seed = 0;
};

struct BackendConfig {
  std::string kind = "rule";  // "rule" or "http"
  HttpEndpoint endpoint;
  std::string prompt_template;  // path, resolved against the config file
};

struct PipelineConfig {
  std::string asset_manifest;
  std::size_t scene_count = 2000;
  SelectionConfig selection;
  std::optional<SelectionMode> fixed_mode;  // unset: alternate uniform/complementary per scene
  std::optional<ClusterRestrictionConfig> cluster_restriction;
  RoomSpec room;
  GridSettings grid;
  CameraIntrinsics intrinsics;
  std::size_t vantage_count = 5;
  std::size_t yaw_steps = 12;
  double max_range = 20.0;
  double scan_cell = 0.1;
  double voxel_size = 0.02;
  LabelMode label_mode = LabelMode::hit_id;
  bool ceiling = false;
  SolverBudget budget;
  std::uint64_t master_seed = 0;
  std::string output_dir = "dataset";
  BackendConfig relation_backend;
  std::optional<BackendConfig> layout_backend;
  std::size_t parallelism = 1;  // 0 = hardware concurrency
  double max_failure_rate = 0.5;
  double training_balance_alpha = 0.5;
  std::size_t descriptor_samples = kDefaultDescriptorSamples;
  std::size_t diversity_k = kDiversityClusters;

  void validate() const {
    if (asset_manifest.empty()) throw ConfigError("asset_manifest is required");
    if (scene_count < 1) throw ConfigError("scene_count must be >= 1");
    selection.validate();
    if (fixed_mode == SelectionMode::paired && !selection.pair_map) {
      throw ConfigError("paired selection mode requires a pair_map");
    }
    room.validate();
    if (!(grid.floor_cell > 0 && grid.wall_cell > 0 && grid.support_cell > 0)) {
      throw ConfigError("grid cell sizes must be > 0");
    }
    if (!(grid.wall_min_height >= 0 && grid.wall_min_height < room.height)) {
      throw ConfigError("grid.wall_min_height must lie in [0, room height)");
    }
    try {
      intrinsics.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (vantage_count < 1 || yaw_steps < 1) throw ConfigError("scan vantage_count and yaw_steps must be >= 1");
    if (!(max_range > 0) || !(scan_cell > 0)) throw ConfigError("scan max_range and cell must be > 0");
    if (!(voxel_size > 0)) throw ConfigError("voxel_size must be > 0");
    if (budget.max_nodes < 1 || budget.max_saved_solutions < 1) throw ConfigError("solver budget values must be >= 1");
    if (!(max_failure_rate >= 0 && max_failure_rate <= 1)) throw ConfigError("max_failure_rate must lie in [0, 1]");
    if (!(training_balance_alpha >= 0 && training_balance_alpha <= 1)) {
      throw ConfigError("training_balance_alpha must lie in [0, 1]");
    }
    if (relation_backend.kind != "rule" && relation_backend.kind != "http") {
      throw ConfigError(fmt::format("unknown relation backend kind '{}'", relation_backend.kind));
    }
    if (relation_backend.kind == "http" && relation_backend.endpoint.url.empty()) {
      throw ConfigError("http relation backend needs a url");
    }
    if (descriptor_samples < 2) throw ConfigError("descriptor_samples must be >= 2");
  }
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError(fmt::format("unknown config key '{}{}'", where, k));
  }
}

inline BackendConfig backend_from_json(const nlohmann::json& j, const std::filesystem::path& base,
                                       const std::string& where) {
  reject_unknown(j, {"kind", "url", "api_key_env", "timeout_seconds", "max_attempts", "prompt_template"}, where);
  BackendConfig b;
  read_opt(j, "kind", b.kind);
  read_opt(j, "url", b.endpoint.url);
  read_opt(j, "api_key_env", b.endpoint.api_key_env);
  read_opt(j, "timeout_seconds", b.endpoint.timeout_seconds);
  read_opt(j, "max_attempts", b.endpoint.max_attempts);
  read_opt(j, "prompt_template", b.prompt_template);
  if (!b.prompt_template.empty()) {
    b.prompt_template = (base / b.prompt_template).lexically_normal().string();
  }
  return b;
}

inline nlohmann::json backend_to_json(const BackendConfig& b) {
  return {{"kind", b.kind},
          {"url", b.endpoint.url},
          {"api_key_env", b.endpoint.api_key_env},
          {"timeout_seconds", b.endpoint.timeout_seconds},
          {"max_attempts", b.endpoint.max_attempts},
          {"prompt_template", b.prompt_template}};
}

}  // namespace detail

/// Parses a pipeline config. Relative paths are resolved against `base_dir`
/// (the directory holding the config file).
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read_opt;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(
      j,
      {"asset_manifest", "scene_count", "M1", "M2", "per_support_count", "selection_mode",
       "real_class_list", "complementary_prob", "pair_map", "pair_prob", "cluster_restriction", "room", "grid",
       "intrinsics", "scan", "voxel_size", "label_mode", "ceiling", "budget", "master_seed", "output_dir",
       "relation_backend", "layout_backend", "parallelism", "max_failure_rate", "training_balance_alpha",
       "descriptor_samples", "diversity_k"},
      "");
  PipelineConfig c;
  read_opt(j, "asset_manifest", c.asset_manifest);
  if (!c.asset_manifest.empty()) {
    c.asset_manifest = (base_dir / c.asset_manifest).lexically_normal().string();
  }
  read_opt(j, "scene_count", c.scene_count);
  read_opt(j, "M1", c.selection.M1);
  read_opt(j, "M2", c.selection.M2);
  read_opt(j, "per_support_count", c.selection.per_support_count);
  if (j.contains("selection_mode")) {
    const auto m = j["selection_mode"].get<std::string>();
    if (m != "alternate") c.fixed_mode = parse_selection_mode(m);
  }
  read_opt(j, "real_class_list", c.selection.real_class_list);
  read_opt(j, "complementary_prob", c.selection.complementary_prob);
  if (j.contains("pair_map")) c.selection.pair_map = j["pair_map"].get<std::map<std::string, std::string>>();
  read_opt(j, "pair_prob", c.selection.pair_prob);
  if (j.contains("cluster_restriction")) {
    const auto& cr = j["cluster_restriction"];
    detail::reject_unknown(cr, {"k", "allowed", "seed"}, "cluster_restriction.");
    ClusterRestrictionConfig r;
    read_opt(cr, "k", r.k);
    read_opt(cr, "allowed", r.allowed);
    read_opt(cr, "seed", r.seed);
    c.cluster_restriction = r;
  }
  if (j.contains("room")) {
    const auto& r = j["room"];
    detail::reject_unknown(r, {"width", "depth", "height"}, "room.");
    read_opt(r, "width", c.room.width);
    read_opt(r, "depth", c.room.depth);
    read_opt(r, "height", c.room.height);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    detail::reject_unknown(g, {"floor_cell", "wall_cell", "support_cell", "wall_min_height"}, "grid.");
    read_opt(g, "floor_cell", c.grid.floor_cell);
    read_opt(g, "wall_cell", c.grid.wall_cell);
    read_opt(g, "support_cell", c.grid.support_cell);
    read_opt(g, "wall_min_height", c.grid.wall_min_height);
  }
  if (j.contains("intrinsics")) {
    const auto& k = j["intrinsics"];
    detail::reject_unknown(k, {"width", "height", "fx", "fy", "cx", "cy", "horizontal_fov_deg"}, "intrinsics.");
    if (k.contains("horizontal_fov_deg")) {
      c.intrinsics = CameraIntrinsics::from_fov(k.value("width", c.intrinsics.width),
                                                k.value("height", c.intrinsics.height),
                                                k["horizontal_fov_deg"].get<double>());
    }
    read_opt(k, "width", c.intrinsics.width);
    read_opt(k, "height", c.intrinsics.height);
    read_opt(k, "fx", c.intrinsics.fx);
    read_opt(k, "fy", c.intrinsics.fy);
    read_opt(k, "cx", c.intrinsics.cx);
    read_opt(k, "cy", c.intrinsics.cy);
  }
  if (j.contains("scan")) {
    const auto& s = j["scan"];
    detail::reject_unknown(s, {"vantage_count", "yaw_steps", "max_range", "cell"}, "scan.");
    read_opt(s, "vantage_count", c.vantage_count);
    read_opt(s, "yaw_steps", c.yaw_steps);
    read_opt(s, "max_range", c.max_range);
    read_opt(s, "cell", c.scan_cell);
  }
  read_opt(j, "voxel_size", c.voxel_size);
  if (j.contains("label_mode")) c.label_mode = parse_label_mode(j["label_mode"].get<std::string>());
  read_opt(j, "ceiling", c.ceiling);
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    detail::reject_unknown(b, {"max_nodes", "max_saved_solutions"}, "budget.");
    read_opt(b, "max_nodes", c.budget.max_nodes);
    read_opt(b, "max_saved_solutions", c.budget.max_saved_solutions);
  }
  read_opt(j, "master_seed", c.master_seed);
  read_opt(j, "output_dir", c.output_dir);
  if (j.contains("output_dir")) c.output_dir = (base_dir / c.output_dir).lexically_normal().string();
  if (j.contains("relation_backend")) {
    c.relation_backend = detail::backend_from_json(j["relation_backend"], base_dir, "relation_backend.");
  }
  if (j.contains("layout_backend")) {
    c.layout_backend = detail::backend_from_json(j["layout_backend"], base_dir, "layout_backend.");
  }
  read_opt(j, "parallelism", c.parallelism);
  read_opt(j, "max_failure_rate", c.max_failure_rate);
  read_opt(j, "training_balance_alpha", c.training_balance_alpha);
  read_opt(j, "descriptor_samples", c.descriptor_samples);
  read_opt(j, "diversity_k", c.diversity_k);
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Every setting that influences generated bytes. Parallelism and the output
/// directory are left out so that datasets compare equal across both.
inline nlohmann::json config_echo(const PipelineConfig& c) {
  nlohmann::json j;
  j["asset_manifest"] = c.asset_manifest;
  j["scene_count"] = c.scene_count;
  j["M1"] = c.selection.M1;
  j["M2"] = c.selection.M2;
  j["per_support_count"] = c.selection.per_support_count;
  j["selection_mode"] = c.fixed_mode ? std::string(to_string(*c.fixed_mode)) : std::string("alternate");
  j["real_class_list"] = c.selection.real_class_list;
  j["complementary_prob"] = c.selection.complementary_prob;
  j["pair_map"] = c.selection.pair_map ? nlohmann::json(*c.selection.pair_map) : nlohmann::json(nullptr);
  j["pair_prob"] = c.selection.pair_prob;
  if (c.cluster_restriction) {
    j["cluster_restriction"] = {{"k", c.cluster_restriction->k},
                                {"allowed", c.cluster_restriction->allowed},
                                {"seed", c.cluster_restriction->seed}};
  } else {
    j["cluster_restriction"] = nullptr;
  }
  j["room"] = {{"width", c.room.width}, {"depth", c.room.depth}, {"height", c.room.height}};
  j["grid"] = {{"floor_cell", c.grid.floor_cell},
               {"wall_cell", c.grid.wall_cell},
               {"support_cell", c.grid.support_cell},
               {"wall_min_height", c.grid.wall_min_height}};
  j["intrinsics"] = {{"width", c.intrinsics.width}, {"height", c.intrinsics.height}, {"fx", c.intrinsics.fx},
                     {"fy", c.intrinsics.fy},       {"cx", c.intrinsics.cx},         {"cy", c.intrinsics.cy}};
  j["scan"] = {{"vantage_count", c.vantage_count},
               {"yaw_steps", c.yaw_steps},
               {"max_range", c.max_range},
               {"cell", c.scan_cell}};
  j["voxel_size"] = c.voxel_size;
  j["label_mode"] = c.label_mode == LabelMode::hit_id ? "hit_id" : "nearest_surface";
  j["ceiling"] = c.ceiling;
  j["budget"] = {{"max_nodes", c.budget.max_nodes}, {"max_saved_solutions", c.budget.max_saved_solutions}};
  j["master_seed"] = c.master_seed;
  j["relation_backend"] = detail::backend_to_json(c.relation_backend);
  j["layout_backend"] = c.layout_backend ? detail::backend_to_json(*c.layout_backend) : nlohmann::json(nullptr);
  j["max_failure_rate"] = c.max_failure_rate;
  j["training_balance_alpha"] = c.training_balance_alpha;
  j["descriptor_samples"] = c.descriptor_samples;
  j["diversity_k"] = c.diversity_k;
  return j;
}

// ---------------------------------------------------------------------------
// Shape descriptors over a catalog

/// Descriptor of each listed asset, computed with a per-asset seed so the
/// result does not depend on evaluation order.
inline std::map<std::string, ShapeDescriptor> asset_descriptors(const MeshLibrary& meshes,
                                                                const std::vector<std::string>& asset_ids,
                                                                std::size_t samples, std::uint64_t seed,
                                                                std::size_t threads = 1) {
  std::vector<std::string> ids(asset_ids);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<ShapeDescriptor> out(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    out[i] = compute_descriptor(meshes.get(ids[i]), samples, hash64(seed, hash_string(ids[i])));
  });
  std::map<std::string, ShapeDescriptor> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], out[i]);
  return m;
}

/// Clusters each group's assets separately (k capped at the group size) and
/// keeps clusters listed in `allowed`.
inline ClusterRestriction build_cluster_restriction(const AssetCatalog& catalog, const MeshLibrary& meshes,
                                                    const ClusterRestrictionConfig& cfg,
                                                    std::size_t samples, std::size_t threads = 1) {
  ClusterRestriction r;
  r.allowed = cfg.allowed;
  for (Group g : kAllGroups) {
    std::vector<std::string> ids;
    for (auto i : catalog.group(g)) ids.push_back(catalog[i].asset_id);
    if (ids.empty()) continue;
    const auto desc = asset_descriptors(meshes, ids, samples, cfg.seed, threads);
    std::vector<ShapeDescriptor> data;
    for (const auto& id : ids) data.push_back(desc.at(id));
    const auto model = kmeans(data, std::min(cfg.k, data.size()), hash64(cfg.seed, static_cast<std::uint64_t>(g)));
    for (std::size_t i = 0; i < ids.size(); ++i) r.asset_cluster[ids[i]] = static_cast<int>(model.assign(data[i]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scene generation

struct GroupCounts {
  std::size_t candidates = 0;
  std::size_t placed = 0;
  std::size_t skipped() const { return candidates - placed; }
  nlohmann::json to_json() const { return {{"candidates", candidates}, {"placed", placed}, {"skipped", skipped()}}; }
};

struct SceneReport {
  std::string scene_id;
  std::size_t index = 0;
  bool ok = false;
  std::string error;
  GroupCounts floor, wall, supported;
  std::size_t point_count = 0;
  std::size_t view_count = 0;
  double seconds = 0;  // wall clock; reported, never written to the dataset
};

/// Everything a scene needs that is shared (read-only) across scenes.
struct PipelineContext {
  PipelineConfig config;
  AssetCatalog catalog;
  std::unique_ptr<MeshLibrary> meshes;
  std::unique_ptr<RelationBackend> relation_backend;

  explicit PipelineContext(PipelineConfig cfg) : config(std::move(cfg)) {
    config.validate();
    catalog = load_catalog(config.asset_manifest);
    meshes = std::make_unique<MeshLibrary>(catalog);
    if (config.relation_backend.kind == "http") {
      const std::string tpl = config.relation_backend.prompt_template.empty()
                                  ? std::string()
                                  : read_text_file(config.relation_backend.prompt_template);
      relation_backend = std::make_unique<HttpRelationBackend>(config.relation_backend.endpoint, tpl);
    } else {
      relation_backend = std::make_unique<RuleBasedBackend>();
    }
    if (config.cluster_restriction) {
      config.selection.cluster_restriction = build_cluster_restriction(
          catalog, *meshes, *config.cluster_restriction, config.descriptor_samples, config.parallelism);
    }
  }
};

inline std::string scene_name(std::size_t index) { return fmt::format("scene_{:05d}", index); }

inline std::uint64_t scene_seed(std::uint64_t master, std::size_t index) {
  return hash64(master, static_cast<std::uint64_t>(index));
}

// Sub-stream tags for the per-scene seed.
enum class Stage : std::uint64_t { select = 1, floor, wall, supported, scan, voxel };

inline std::uint64_t stage_seed(std::uint64_t scene, Stage s, std::uint64_t extra = 0) {
  return hash64(scene, static_cast<std::uint64_t>(s), extra);
}

struct GeneratedScene {
  SceneSample sample;
  SceneLayout layout;
  std::vector<SceneInstance> instances;
  SceneMesh mesh;
  std::vector<ScanView> views;
  LabeledPointCloud cloud;
  SceneReport report;
};

inline std::vector<ObjectSpec> object_specs(const AssetCatalog& catalog, const std::vector<std::string>& assets,
                                            const std::string& prefix, SceneLayout& layout) {
  std::vector<ObjectSpec> out;
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const auto& r = catalog.at(assets[i]);
    ObjectSpec o{fmt::format("{}:{}", prefix, i), r.class_name, r.target_dims};
    layout.asset_of[o.id] = r.asset_id;
    out.push_back(std::move(o));
  }
  return out;
}

/// Selection, relations and layout for one scene.
inline SceneLayout layout_scene(const PipelineContext& ctx, std::uint64_t seed, SelectionMode mode,
                                SceneReport* report = nullptr) {
  const auto& cfg = ctx.config;
  SelectionConfig sel = cfg.selection;
  sel.mode = mode;
  const SelectionResult chosen = select_objects(ctx.catalog, sel, stage_seed(seed, Stage::select));

  SceneLayout layout;
  std::map<std::string, Aabb> boxes;  // object id -> placed object AABB
  auto dims_of = [&](const std::string& id) { return ctx.catalog.at(layout.asset_of.at(id)).target_dims; };

  const auto floor_objs = object_specs(ctx.catalog, chosen.o_floor, "floor", layout);
  const auto floor_rel = infer_relations(floor_objs, Group::floor, *ctx.relation_backend,
                                         stage_seed(seed, Stage::floor, 1));
  layout.floor = solve_floor(cfg.room, cfg.grid, floor_objs, floor_rel, cfg.budget, stage_seed(seed, Stage::floor));
  std::vector<Aabb> floor_boxes;
  for (const auto& p : layout.floor.placements) {
    boxes[p.object_id] = object_box(p, dims_of(p.object_id));
    floor_boxes.push_back(boxes[p.object_id]);
  }

  const auto wall_objs = object_specs(ctx.catalog, chosen.o_wall, "wall", layout);
  const auto wall_rel = infer_relations(wall_objs, Group::wall, *ctx.relation_backend,
                                        stage_seed(seed, Stage::wall, 1));
  layout.wall = solve_wall(cfg.room, cfg.grid, wall_objs, wall_rel, floor_boxes, cfg.budget,
                           stage_seed(seed, Stage::wall));
  for (const auto& p : layout.wall.placements) boxes[p.object_id] = object_box(p, dims_of(p.object_id));

  GroupCounts supported;
  for (std::size_t g = 0; g < chosen.o_obj.size(); ++g) {
    const auto& group = chosen.o_obj[g];
    supported.candidates += group.asset_ids.size();
    auto sup = boxes.find(group.supporter_id);
    if (sup == boxes.end()) continue;  // supporter was not placed
    const auto objs = object_specs(ctx.catalog, group.asset_ids, group.supporter_id + "/obj", layout);
    const auto rel = infer_relations(objs, Group::obj, *ctx.relation_backend, stage_seed(seed, Stage::supported, 2 * g));
    std::vector<Aabb> obstacles;
    for (const auto& [id, b] : boxes) obstacles.push_back(b);
    auto sol = solve_supported(cfg.room, cfg.grid, sup->second, objs, rel, obstacles, cfg.budget,
                               stage_seed(seed, Stage::supported, 2 * g + 1));
    for (const auto& p : sol.placements) boxes[p.object_id] = object_box(p, dims_of(p.object_id));
    supported.placed += sol.placed_count;
    layout.supported.push_back(std::move(sol));
  }
  if (report) {
    report->floor = {floor_objs.size(), layout.floor.placed_count};
    report->wall = {wall_objs.size(), layout.wall.placed_count};
    report->supported = supported;
  }
  return layout;
}

inline SelectionMode scene_mode(const PipelineConfig& cfg, std::size_t index) {
  return cfg.fixed_mode ? *cfg.fixed_mode : alternate_strategy(index);
}

/// Runs the full per-scene pipeline in memory. Throws on failure.
inline GeneratedScene generate_scene(const PipelineContext& ctx, std::size_t index, std::size_t threads = 1) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = ctx.config;
  GeneratedScene out;
  auto& rep = out.report;
  rep.scene_id = scene_name(index);
  rep.index = index;
  const std::uint64_t seed = scene_seed(cfg.master_seed, index);
  const SelectionMode mode = scene_mode(cfg, index);

  out.layout = layout_scene(ctx, seed, mode, &rep);
  auto built = build_scene(cfg.room, out.layout, *ctx.meshes, BuildOptions{cfg.ceiling});
  out.mesh = std::move(built.first);
  out.instances = std::move(built.second);

  ScanOptions scan;
  scan.intrinsics = cfg.intrinsics;
  scan.vantage_count = cfg.vantage_count;
  scan.yaw_steps = cfg.yaw_steps;
  scan.max_range = cfg.max_range;
  scan.scan_cell = cfg.scan_cell;
  scan.threads = threads;
  const ScanTarget target(out.mesh);
  out.views = scan_scene(target, cfg.room, scan, stage_seed(seed, Stage::scan));
  auto fused = backproject_and_fuse(out.views, cfg.intrinsics);
  auto down = voxel_downsample(fused, cfg.voxel_size, stage_seed(seed, Stage::voxel), threads);
  out.cloud = quantize_to_float(assign_labels(std::move(down), target, cfg.label_mode, threads));

  auto& s = out.sample;
  s.scene_id = rep.scene_id;
  s.seed = seed;
  s.room = cfg.room;
  s.instances = instance_records(out.instances, out.cloud);
  std::size_t structure = 0;
  for (auto id : out.cloud.instance_ids) structure += id == 0;

  rep.point_count = out.cloud.size();
  rep.view_count = out.views.size();
  rep.ok = true;

  nlohmann::json vantages = nlohmann::json::array();
  for (std::size_t v = 0; v < out.views.size(); v += cfg.yaw_steps) vantages.push_back(vec3_json(out.views[v].pose.position));
  nlohmann::json traces{{"floor", out.layout.floor.trace()}, {"wall", out.layout.wall.trace()}};
  s.meta = {{"scene_index", index},
            {"seed", seed},
            {"selection_mode", to_string(mode)},
            {"groups", {{"floor", rep.floor.to_json()}, {"wall", rep.wall.to_json()}, {"supported", rep.supported.to_json()}}},
            {"instance_count", out.instances.size()},
            {"point_count", rep.point_count},
            {"structure_point_count", structure},
            {"view_count", rep.view_count},
            {"vantage_points", vantages},
            {"solver", traces}};
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

class PipelineAbort : public Error {
 public:
  using Error::Error;
};

struct SynthResult {
  DatasetManifest manifest;
  std::vector<SceneReport> reports;
  std::filesystem::path root;
};

/// Generates and exports the dataset. A failing scene is logged and skipped;
/// transport errors and a failure rate above the configured limit abort.
inline SynthResult synth(const PipelineContext& ctx) {
  const auto& cfg = ctx.config;
  const std::filesystem::path root = cfg.output_dir;
  const std::size_t workers = std::min(resolve_threads(cfg.parallelism), cfg.scene_count);
  const std::size_t inner = std::max<std::size_t>(1, resolve_threads(cfg.parallelism) / workers);

  SynthResult res;
  res.root = root;
  res.reports.resize(cfg.scene_count);
  parallel_for(cfg.scene_count, workers, [&](std::size_t i) {
    auto& rep = res.reports[i];
    try {
      GeneratedScene g = generate_scene(ctx, i, inner);
      export_scene(root / "scenes" / g.sample.scene_id, g.sample, g.cloud);
      rep = g.report;
      log_info("{}: placed {}/{} floor, {}/{} wall, {}/{} supported; {} points; {:.2f}s", rep.scene_id,
               rep.floor.placed, rep.floor.candidates, rep.wall.placed, rep.wall.candidates, rep.supported.placed,
               rep.supported.candidates, rep.point_count, rep.seconds);
    } catch (const TransportError&) {
      throw;
    } catch (const Error& e) {
      rep.scene_id = scene_name(i);
      rep.index = i;
      rep.ok = false;
      rep.error = e.what();
      log_error("{} failed: {}", rep.scene_id, e.what());
    }
  });

  auto& m = res.manifest;
  m.config = config_echo(cfg);
  m.master_seed = cfg.master_seed;
  m.training_balance_alpha = cfg.training_balance_alpha;
  for (const auto& r : res.reports) {
    if (r.ok) {
      m.scenes.push_back({r.scene_id, "scenes/" + r.scene_id});
    } else {
      m.failed_scenes.push_back(r.scene_id);
    }
  }
  const double rate = static_cast<double>(m.failed_scenes.size()) / static_cast<double>(cfg.scene_count);
  if (rate > cfg.max_failure_rate) {
    throw PipelineAbort(fmt::format("{} of {} scenes failed ({:.0f}% > {:.0f}% limit)", m.failed_scenes.size(),
                                    cfg.scene_count, 100 * rate, 100 * cfg.max_failure_rate));
  }
  export_manifest(root, m);
  return res;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  std::string scene_id;
  std::string message;
};

struct ValidationReport {
  std::size_t scenes_checked = 0;
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }

  std::set<std::string> scenes_with_issues() const {
    std::set<std::string> s;
    for (const auto& i : issues) s.insert(i.scene_id);
    return s;
  }
};

inline Aabb instance_box(const InstanceRecord& r) {
  const Aabb local{Vec3(-0.5 * r.dims.x(), -0.5 * r.dims.y(), 0.0), Vec3(0.5 * r.dims.x(), 0.5 * r.dims.y(), r.dims.z())};
  return local.transformed(r.transform);
}

/// Checks one loaded scene; appends problems to `out`.
inline void validate_scene(const ScenePaths& paths, const LoadedScene& scene, std::vector<ValidationIssue>& out) {
  const auto& s = scene.sample;
  auto issue = [&](std::string msg) { out.push_back({s.scene_id, std::move(msg)}); };

  // Byte-level round trip.
  if (encode_ply(scene.cloud) != read_bytes(paths.points())) issue("points.ply does not round-trip");
  {
    const std::string s2 = instances_to_json(s).dump(2) + "\n";
    if (std::vector<std::uint8_t>(s2.begin(), s2.end()) != read_bytes(paths.instances())) {
      issue("instances.json does not round-trip");
    }
  }

  // Index: ids unique and positive, counts match the cloud.
  std::map<std::uint32_t, const InstanceRecord*> index;
  for (const auto& r : s.instances) {
    if (r.instance_id == 0) issue(fmt::format("instance '{}' uses reserved id 0", r.object_id));
    if (!index.emplace(r.instance_id, &r).second) issue(fmt::format("duplicate instance id {}", r.instance_id));
  }
  std::map<std::uint32_t, std::size_t> counts;
  for (auto id : scene.cloud.instance_ids) ++counts[id];
  std::size_t labeled = 0, indexed = 0;
  for (const auto& [id, n] : counts) {
    if (id == 0) continue;
    labeled += n;
    if (!index.count(id)) issue(fmt::format("{} points carry instance id {} which is not in the index", n, id));
  }
  for (const auto& [id, r] : index) {
    indexed += r->point_count;
    const std::size_t actual = counts.count(id) ? counts[id] : 0;
    if (actual != r->point_count) {
      issue(fmt::format("instance {} lists {} points but the cloud has {}", id, r->point_count, actual));
    }
  }
  if (labeled != indexed) issue(fmt::format("index covers {} points, cloud labels {}", indexed, labeled));

  // Layout: inside the room and pairwise overlap-free.
  const Aabb room = s.room.box().inflated(1e-6);
  std::vector<Aabb> boxes;
  for (const auto& r : s.instances) {
    boxes.push_back(instance_box(r));
    if (!room.contains(boxes.back())) issue(fmt::format("instance {} extends outside the room", r.instance_id));
  }
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    for (std::size_t b = a + 1; b < boxes.size(); ++b) {
      if (boxes[a].intersects_interior(boxes[b], 1e-6)) {
        issue(fmt::format("instances {} and {} overlap", s.instances[a].instance_id, s.instances[b].instance_id));
      }
    }
  }
}

inline ValidationReport validate_dataset(const std::filesystem::path& root) {
  ValidationReport rep;
  DatasetManifest m;
  try {
    m = load_manifest(root);
  } catch (const Error& e) {
    rep.issues.push_back({"", e.what()});
    return rep;
  }
  for (const auto& entry : m.scenes) {
    ++rep.scenes_checked;
    const ScenePaths paths{root / entry.path};
    try {
      const LoadedScene scene = load_scene(paths.dir);
      if (scene.sample.scene_id != entry.scene_id) {
        rep.issues.push_back({entry.scene_id, fmt::format("scene files name '{}'", scene.sample.scene_id)});
      }
      validate_scene(paths, scene, rep.issues);
    } catch (const Error& e) {
      rep.issues.push_back({entry.scene_id, e.what()});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Metrics over an exported dataset

struct DatasetContents {
  DatasetManifest manifest;
  std::vector<SceneSample> scenes;
};

inline DatasetContents load_dataset_index(const std::filesystem::path& root) {
  DatasetContents d;
  d.manifest = load_manifest(root);
  for (const auto& e : d.manifest.scenes) {
    SceneSample s;
    const ScenePaths p{root / e.path};
    instances_from_json(read_json_file(p.instances()), s, p.instances().string());
    d.scenes.push_back(std::move(s));
  }
  return d;
}

inline std::vector<SceneClassSet> scene_class_sets(const std::vector<SceneSample>& scenes) {
  std::vector<SceneClassSet> out;
  for (const auto& s : scenes) {
    SceneClassSet c{s.scene_id, {}};
    for (const auto& i : s.instances) c.classes.insert(i.class_name);
    if (c.classes.empty()) {
      log_warn("{} has no instances; left out of context complexity", s.scene_id);
      continue;
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// Descriptor of every placed object (one entry per instance).
inline std::vector<ShapeDescriptor> placed_descriptors(const std::vector<SceneSample>& scenes,
                                                       const MeshLibrary& meshes, std::size_t samples,
                                                       std::uint64_t seed, std::size_t threads = 1) {
  std::vector<std::string> ids;
  for (const auto& s : scenes) {
    for (const auto& i : s.instances) ids.push_back(i.asset_id);
  }
  const auto desc = asset_descriptors(meshes, ids, samples, seed, threads);
  std::vector<ShapeDescriptor> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(desc.at(id));
  return out;
}

/// Rebuilds the labeled scene mesh from its stored instance index.
inline SceneMesh rebuild_scene_mesh(const SceneSample& s, const MeshLibrary& meshes, bool ceiling = false) {
  std::vector<SceneInstance> inst;
  for (const auto& r : s.instances) {
    inst.push_back({r.instance_id, r.object_id, r.asset_id, r.class_name, r.surface_kind, r.surface_index, r.dims,
                    r.transform});
  }
  return assemble_scene(s.room, inst, meshes, BuildOptions{ceiling});
}

/// Four elevated corner views looking toward the room center.
inline std::vector<CameraPose> overview_poses(const RoomSpec& room) {
  const double m = 0.05;
  const double z = 0.85 * room.height;
  const Vec3 corners[4] = {{m, m, z}, {room.width - m, m, z}, {room.width - m, room.depth - m, z}, {m, room.depth - m, z}};
  std::vector<CameraPose> poses;
  for (const auto& c : corners) {
    const Vec2 to(0.5 * room.width - c.x(), 0.5 * room.depth - c.y());
    // forward = (-sin yaw, cos yaw)
    const double yaw = std::atan2(-to.x(), to.y()) * 180.0 / M_PI;
    const double pitch = -std::atan2(z - 0.3 * room.height, to.norm()) * 180.0 / M_PI;
    poses.push_back({c, yaw, pitch});
  }
  return poses;
}

inline std::vector<RgbImage> render_overviews(const SceneMesh& mesh, const RoomSpec& room,
                                              const CameraIntrinsics& k, std::size_t threads = 1) {
  const ScanTarget target(mesh);
  std::vector<RgbImage> out;
  for (const auto& pose : overview_poses(room)) out.push_back(render_color(target, pose, k, threads));
  return out;
}

struct MetricsOptions {
  std::string catalog_override;  // default: asset manifest recorded in the dataset
  std::size_t k = kDiversityClusters;
  std::size_t descriptor_samples = kDefaultDescriptorSamples;
  std::uint64_t seed = 0;
  std::optional<BackendConfig> layout_backend;
  std::size_t concurrency = 4;
  std::size_t threads = 1;
};

inline MetricsReport compute_dataset_metrics(const std::filesystem::path& root, const MetricsOptions& opt) {
  const DatasetContents d = load_dataset_index(root);
  MetricsReport rep;
  rep.context_complexity = context_complexity(scene_class_sets(d.scenes));

  std::string catalog_path = opt.catalog_override;
  if (catalog_path.empty()) catalog_path = d.manifest.config.value("asset_manifest", std::string());
  if (catalog_path.empty()) throw ConfigError("dataset does not record its asset manifest; pass a catalog");
  const AssetCatalog catalog = load_catalog(catalog_path);
  const MeshLibrary meshes(catalog);
  rep.geometry_diversity_entropy = geometry_diversity(
      placed_descriptors(d.scenes, meshes, opt.descriptor_samples, opt.seed, opt.threads), opt.k, opt.seed);

  if (opt.layout_backend) {
    const std::string prompt =
        opt.layout_backend->prompt_template.empty() ? std::string() : read_text_file(opt.layout_backend->prompt_template);
    HttpLayoutScorer scorer(opt.layout_backend->endpoint, prompt);
    const auto k = CameraIntrinsics::from_fov(320, 240, 90.0);
    std::vector<std::vector<RgbImage>> renders;
    for (const auto& s : d.scenes) renders.push_back(render_overviews(rebuild_scene_mesh(s, meshes), s.room, k, opt.threads));
    const auto scores = score_layouts(renders, scorer, opt.concurrency);
    for (std::size_t i = 0; i < d.scenes.size(); ++i) rep.layout_scores.emplace_back(d.scenes[i].scene_id, scores[i]);
  }
  return rep;
}

}  // namespace scenesynth
