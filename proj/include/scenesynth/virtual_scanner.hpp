#pragma once

#include "scenesynth/bvh.hpp"
#include "scenesynth/common.hpp"
#include "scenesynth/image_io.hpp"
#include "scenesynth/layout_solver.hpp"
#include "scenesynth/scene_builder.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <unordered_map>
#include <vector>

namespace scenesynth {

/// Pinhole intrinsics. Pixel (u, v) has its center at integer coordinates;
/// u grows right, v grows down.
struct CameraIntrinsics {
  double fx = 277.1;
  double fy = 277.1;
  double cx = 159.5;
  double cy = 119.5;
  int width = 320;
  int height = 240;

  static CameraIntrinsics from_fov(int width, int height, double horizontal_fov_deg) {
    CameraIntrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(0.5 * horizontal_fov_deg * M_PI / 180.0);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    return k;
  }

  void validate() const {
    if (!(fx > 0 && fy > 0)) throw InvalidArgument("intrinsics: fx and fy must be > 0");
    if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: image size must be > 0");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
      throw InvalidArgument("intrinsics: principal point outside the image");
    }
  }
};

/// Camera at `position`; yaw rotates about +z (0 = looking along +y, 90 =
/// along -x), pitch tilts the view up.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  double yaw_deg = 0;
  double pitch_deg = 0;

  /// Columns: camera x (right), y (down), z (forward) in world coordinates.
  Mat3 rotation() const {
    const double y = yaw_deg * M_PI / 180.0;
    const double p = pitch_deg * M_PI / 180.0;
    const Vec3 forward(-std::sin(y) * std::cos(p), std::cos(y) * std::cos(p), std::sin(p));
    const Vec3 right(std::cos(y), std::sin(y), 0.0);
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    return r;
  }

  Vec3 to_world(const Vec3& camera_point) const { return rotation() * camera_point + position; }
  Vec3 to_camera(const Vec3& world_point) const {
    return rotation().transpose() * (world_point - position);
  }
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;             // meters along the optical axis; 0 = no hit
  std::vector<std::uint32_t> instance;   // valid where depth > 0
  std::vector<std::array<std::uint8_t, 3>> color;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        instance(static_cast<std::size_t>(w) * h, 0), color(static_cast<std::size_t>(w) * h, {0, 0, 0}) {}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](double d) { return d > 0; }));
  }
};

struct LabeledPointCloud {
  std::vector<Vec3> points;
  std::vector<std::uint32_t> instance_ids;
  std::vector<std::array<std::uint8_t, 3>> colors;  // empty or parallel to points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void validate() const {
    if (instance_ids.size() != points.size() || (!colors.empty() && colors.size() != points.size())) {
      throw InvalidArgument("point cloud arrays differ in length");
    }
  }
};

/// A scene ready for scanning: labeled mesh plus its acceleration structure.
class ScanTarget {
 public:
  explicit ScanTarget(SceneMesh scene) : scene_(std::move(scene)), bvh_(scene_.mesh) {}
  ScanTarget(const ScanTarget&) = delete;
  ScanTarget& operator=(const ScanTarget&) = delete;

  const SceneMesh& scene() const { return scene_; }
  const Bvh& bvh() const { return bvh_; }

 private:
  SceneMesh scene_;
  Bvh bvh_;
};

inline std::array<std::uint8_t, 3> to_rgb8(const Vec3& c) {
  auto q = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  return {q(c.x()), q(c.y()), q(c.z())};
}

inline Vec3 camera_ray_direction(const CameraIntrinsics& k, double u, double v) {
  return {(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0};
}

/// Ray-cast depth render. Each pixel casts one ray through its center; depth
/// is the hit's distance along the camera's forward axis.
inline DepthImage render_depth(const ScanTarget& target, const CameraPose& pose,
                               const CameraIntrinsics& k, double max_range = 20.0,
                               std::size_t threads = 1) {
  k.validate();
  DepthImage img(k.width, k.height);
  const Mat3 rot = pose.rotation();
  const auto& mesh = target.scene().mesh;
  parallel_for(static_cast<std::size_t>(k.height), threads, [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir_cam = camera_ray_direction(k, u, v);
      const Ray ray{pose.position, rot * dir_cam};
      // With dir_cam.z == 1 the ray parameter equals z-depth.
      const Hit h = target.bvh().intersect(ray, max_range / dir_cam.norm());
      if (!h.valid()) continue;
      const std::size_t idx = img.index(u, v);
      img.depth[idx] = h.t;
      img.instance[idx] = target.scene().triangle_instance[h.triangle];
      if (mesh.has_colors()) {
        const auto& tri = mesh.triangles[h.triangle];
        const Vec3 c = (1 - h.u - h.v) * mesh.vertex_colors[tri[0]] + h.u * mesh.vertex_colors[tri[1]] +
                       h.v * mesh.vertex_colors[tri[2]];
        img.color[idx] = to_rgb8(c);
      } else {
        img.color[idx] = to_rgb8(instance_color(img.instance[idx]));
      }
    }
  });
  return img;
}

/// World AABB of each instance's triangles (instance id -> box).
inline std::map<std::uint32_t, Aabb> instance_bounds(const SceneMesh& scene) {
  std::map<std::uint32_t, Aabb> out;
  for (std::size_t t = 0; t < scene.mesh.triangles.size(); ++t) {
    const auto id = scene.triangle_instance[t];
    if (id == 0) continue;
    for (auto vi : scene.mesh.triangles[t]) out[id].extend(scene.mesh.vertices[vi]);
  }
  return out;
}

/// Centers of the free cells of the mid-height plane. A cell is excluded when
/// any instance's projected AABB overlaps its interior.
inline std::vector<Vec3> candidate_scan_cells(const SceneMesh& scene, const RoomSpec& room,
                                              double cell = 0.1) {
  room.validate();
  if (!(cell > 0)) throw InvalidArgument("scan cell size must be > 0");
  const int nx = PlacementGrid::cells_in(room.width, cell);
  const int ny = PlacementGrid::cells_in(room.depth, cell);
  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(nx) * ny, 0);
  constexpr double eps = 1e-9;
  for (const auto& [id, box] : instance_bounds(scene)) {
    const int i0 = std::max(0, static_cast<int>(std::floor(box.min.x() / cell + eps)));
    const int i1 = std::min(nx, static_cast<int>(std::ceil(box.max.x() / cell - eps)));
    const int j0 = std::max(0, static_cast<int>(std::floor(box.min.y() / cell + eps)));
    const int j1 = std::min(ny, static_cast<int>(std::ceil(box.max.y() / cell - eps)));
    for (int j = j0; j < j1; ++j) {
      for (int i = i0; i < i1; ++i) blocked[static_cast<std::size_t>(j) * nx + i] = 1;
    }
  }
  std::vector<Vec3> out;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!blocked[static_cast<std::size_t>(j) * nx + i]) {
        out.emplace_back((i + 0.5) * cell, (j + 0.5) * cell, 0.5 * room.height);
      }
    }
  }
  if (out.empty()) throw ScanError("no free scan cells: scene too cluttered to scan");
  return out;
}

/// Greedy farthest point sampling. The first pick is a seeded uniform choice;
/// each later pick maximizes the minimum distance to the picks so far (ties
/// go to the lowest index). Returns indices into `candidates`.
inline std::vector<std::size_t> farthest_point_sampling_indices(std::span<const Vec3> candidates,
                                                                std::size_t k, std::uint64_t seed) {
  if (candidates.empty()) throw InvalidArgument("farthest point sampling of an empty set");
  k = std::min(k, candidates.size());
  std::vector<std::size_t> picks;
  if (k == 0) return picks;
  Rng rng(seed);
  picks.push_back(rng.uniform_index(candidates.size()));
  std::vector<double> min_d2(candidates.size(), std::numeric_limits<double>::infinity());
  while (picks.size() < k) {
    const Vec3& last = candidates[picks.back()];
    std::size_t best = 0;
    double best_d2 = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      min_d2[i] = std::min(min_d2[i], (candidates[i] - last).squaredNorm());
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    picks.push_back(best);
  }
  return picks;
}

inline std::vector<Vec3> farthest_point_sampling(std::span<const Vec3> candidates, std::size_t k,
                                                 std::uint64_t seed) {
  std::vector<Vec3> out;
  for (auto i : farthest_point_sampling_indices(candidates, k, seed)) out.push_back(candidates[i]);
  return out;
}

struct ScanOptions {
  CameraIntrinsics intrinsics;
  std::size_t vantage_count = 5;
  std::size_t yaw_steps = 12;  // 360 / yaw_steps degrees apart
  double pitch_deg = 0;
  double max_range = 20.0;
  double scan_cell = 0.1;
  std::size_t threads = 1;
};

struct ScanView {
  std::size_t vantage = 0;
  std::size_t yaw_index = 0;
  CameraPose pose;
  DepthImage image;
};

/// Poses for a scan: every vantage point times every yaw step, in canonical
/// (vantage, yaw) order.
inline std::vector<CameraPose> scan_poses(const SceneMesh& scene, const RoomSpec& room,
                                          const ScanOptions& opt, std::uint64_t seed) {
  const auto cells = candidate_scan_cells(scene, room, opt.scan_cell);
  const auto vantages = farthest_point_sampling(cells, opt.vantage_count, seed);
  std::vector<CameraPose> poses;
  for (const auto& v : vantages) {
    for (std::size_t y = 0; y < opt.yaw_steps; ++y) {
      poses.push_back({v, 360.0 * static_cast<double>(y) / static_cast<double>(opt.yaw_steps), opt.pitch_deg});
    }
  }
  return poses;
}

inline std::vector<ScanView> scan_scene(const ScanTarget& target, const RoomSpec& room,
                                        const ScanOptions& opt, std::uint64_t seed) {
  const auto poses = scan_poses(target.scene(), room, opt, seed);
  std::vector<ScanView> views(poses.size());
  parallel_for(poses.size(), opt.threads, [&](std::size_t i) {
    views[i].vantage = i / opt.yaw_steps;
    views[i].yaw_index = i % opt.yaw_steps;
    views[i].pose = poses[i];
    views[i].image = render_depth(target, poses[i], opt.intrinsics, opt.max_range, 1);
  });
  return views;
}

/// Back-projects every valid pixel to world space; output order is (view,
/// row, column).
inline LabeledPointCloud backproject_and_fuse(const std::vector<ScanView>& views,
                                              const CameraIntrinsics& k) {
  LabeledPointCloud cloud;
  for (const auto& view : views) {
    const auto& img = view.image;
    if (img.width != k.width || img.height != k.height) {
      throw InvalidArgument("depth image size does not match the intrinsics");
    }
    const Mat3 rot = view.pose.rotation();
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        const std::size_t idx = img.index(u, v);
        const double d = img.depth[idx];
        if (!(d > 0)) continue;
        const Vec3 cam((u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d);
        cloud.points.push_back(rot * cam + view.pose.position);
        cloud.instance_ids.push_back(img.instance[idx]);
        cloud.colors.push_back(img.color[idx]);
      }
    }
  }
  return cloud;
}

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    return static_cast<std::size_t>(hash64(static_cast<std::uint64_t>(k.x), static_cast<std::uint64_t>(k.y),
                                           static_cast<std::uint64_t>(k.z)));
  }
};

inline VoxelKey voxel_of(const Vec3& p, double voxel) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

/// Keeps one seeded-random point per occupied voxel: the one minimizing
/// hash(seed, voxel, point index). Independent of traversal order, so the
/// result is identical for any thread count. Output keeps input order.
inline LabeledPointCloud voxel_downsample(const LabeledPointCloud& cloud, double voxel,
                                          std::uint64_t seed, std::size_t threads = 1) {
  if (!(voxel > 0)) throw InvalidArgument("voxel size must be > 0");
  cloud.validate();
  struct Choice {
    std::uint64_t key;
    std::size_t index;
    bool better_than(const Choice& o) const { return key < o.key || (key == o.key && index < o.index); }
  };
  using Map = std::unordered_map<VoxelKey, Choice, VoxelKeyHash>;
  const auto priority = [&](const VoxelKey& v, std::size_t i) {
    return hash64(seed, static_cast<std::uint64_t>(v.x), static_cast<std::uint64_t>(v.y),
                  static_cast<std::uint64_t>(v.z), static_cast<std::uint64_t>(i));
  };

  const std::size_t n = cloud.size();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(resolve_threads(threads), n));
  std::vector<Map> partial(chunks);
  parallel_for(chunks, chunks, [&](std::size_t c) {
    const std::size_t begin = n * c / chunks, end = n * (c + 1) / chunks;
    auto& m = partial[c];
    for (std::size_t i = begin; i < end; ++i) {
      const VoxelKey v = voxel_of(cloud.points[i], voxel);
      const Choice cand{priority(v, i), i};
      auto [it, inserted] = m.try_emplace(v, cand);
      if (!inserted && cand.better_than(it->second)) it->second = cand;
    }
  });
  Map merged = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) {
    for (const auto& [v, choice] : partial[c]) {
      auto [it, inserted] = merged.try_emplace(v, choice);
      if (!inserted && choice.better_than(it->second)) it->second = choice;
    }
  }
  std::vector<std::size_t> keep;
  keep.reserve(merged.size());
  for (const auto& [v, choice] : merged) keep.push_back(choice.index);
  std::sort(keep.begin(), keep.end());

  LabeledPointCloud out;
  out.points.reserve(keep.size());
  out.instance_ids.reserve(keep.size());
  for (auto i : keep) {
    out.points.push_back(cloud.points[i]);
    out.instance_ids.push_back(cloud.instance_ids[i]);
    if (!cloud.colors.empty()) out.colors.push_back(cloud.colors[i]);
  }
  return out;
}

enum class LabelMode { hit_id, nearest_surface };

inline LabelMode parse_label_mode(std::string_view s) {
  if (s == "hit_id") return LabelMode::hit_id;
  if (s == "nearest_surface") return LabelMode::nearest_surface;
  throw ConfigError(fmt::format("unknown label mode '{}'", s));
}

inline constexpr double kLabelTieTolerance = 1e-12;

/// Instance owning the nearest scene triangle; among triangles within
/// kLabelTieTolerance of the minimum distance the lowest instance id wins.
inline std::uint32_t nearest_instance(const ScanTarget& target, const Vec3& p) {
  const auto [best_d2, tri] = target.bvh().nearest(p);
  if (tri == std::numeric_limits<std::uint32_t>::max()) return 0;
  const double limit = std::sqrt(best_d2) + kLabelTieTolerance;
  const double limit2 = limit * limit;
  std::uint32_t label = target.scene().triangle_instance[tri];
  target.bvh().visit_within(
      p, [&](double, std::uint32_t t) { label = std::min(label, target.scene().triangle_instance[t]); },
      [&]() { return limit2; });
  return label;
}

inline LabeledPointCloud assign_labels(LabeledPointCloud cloud, const ScanTarget& target,
                                       LabelMode mode, std::size_t threads = 1) {
  if (mode == LabelMode::hit_id) return cloud;
  parallel_for(cloud.size(), threads, [&](std::size_t i) {
    cloud.instance_ids[i] = nearest_instance(target, cloud.points[i]);
  });
  return cloud;
}

/// Debug dump of one view: 16-bit depth PNG (mm), 16-bit instance PNG and the
/// pose as JSON.
inline void dump_view(const std::filesystem::path& dir, const std::string& stem, const ScanView& view) {
  std::filesystem::create_directories(dir);
  const auto& img = view.image;
  std::vector<std::uint16_t> depth_mm(img.depth.size()), ids(img.depth.size());
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    depth_mm[i] = static_cast<std::uint16_t>(std::clamp(std::lround(img.depth[i] * 1000.0), 0L, 65535L));
    ids[i] = static_cast<std::uint16_t>(std::min<std::uint32_t>(img.instance[i], 65535u));
  }
  write_file(dir / (stem + "_depth.png"), encode_png_gray16(img.width, img.height, depth_mm));
  write_file(dir / (stem + "_instance.png"), encode_png_gray16(img.width, img.height, ids));
  nlohmann::json pose{{"position", {view.pose.position.x(), view.pose.position.y(), view.pose.position.z()}},
                      {"yaw_deg", view.pose.yaw_deg},
                      {"pitch_deg", view.pose.pitch_deg},
                      {"vantage", view.vantage},
                      {"yaw_index", view.yaw_index}};
  std::ofstream(dir / (stem + "_pose.json")) << pose.dump(2);
}

/// Shaded color render for previews and layout scoring.
inline RgbImage render_color(const ScanTarget& target, const CameraPose& pose, const CameraIntrinsics& k,
                             std::size_t threads = 1) {
  const DepthImage img = render_depth(target, pose, k, 1e6, threads);
  RgbImage out(k.width, k.height);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const auto idx = img.index(u, v);
      auto* px = out.at(u, v);
      if (!(img.depth[idx] > 0)) {
        px[0] = 235, px[1] = 240, px[2] = 250;
        continue;
      }
      // Simple depth cue so surfaces at different distances separate.
      const double shade = 1.0 / (1.0 + 0.08 * img.depth[idx]);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(img.color[idx][c] * shade);
    }
  }
  return out;
}

}  // namespace scenesynth
