#include "scenesynth/scene_builder.hpp"
#include "scenesynth/virtual_scanner.hpp"

#include "support/analytic_scene.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <tuple>

namespace ss = scenesynth;
using ss::Vec2;
using ss::Vec3;

namespace {

ss::AssetCatalog cube_catalog(const std::vector<std::pair<std::string, Vec3>>& assets) {
  std::vector<ss::AssetRecord> recs;
  for (const auto& [id, dims] : assets) recs.push_back({id, id, ss::Group::floor, id + ".obj", dims, ss::FrontAxis::pos_y});
  return ss::AssetCatalog(recs, "/nonexistent");
}

// Asymmetric test mesh so rotations are visible in vertex positions.
ss::TriangleMesh wedge() {
  ss::TriangleMesh m;
  m.vertices = {{-0.5, -0.5, 0}, {0.5, -0.5, 0}, {-0.5, 0.5, 0}, {-0.5, -0.5, 1}};
  m.triangles = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scene assembly

TEST(SceneBuilder, EmptyLayoutIsTheShell) {
  const auto catalog = cube_catalog({});
  const ss::MeshLibrary lib(catalog);
  const auto [scene, instances] = ss::build_scene({4, 4, 3}, {}, lib);
  EXPECT_EQ(scene.mesh.triangles.size(), 10u);
  EXPECT_TRUE(instances.empty());
  EXPECT_TRUE(std::all_of(scene.triangle_instance.begin(), scene.triangle_instance.end(),
                          [](auto id) { return id == 0; }));
}

TEST(SceneBuilder, OneCubeAddsTwelveLabeledTriangles) {
  const auto catalog = cube_catalog({{"cube", Vec3(0.5, 0.5, 0.5)}});
  ss::MeshLibrary lib(catalog);
  lib.insert("cube", ss::canonicalize_mesh(ss::primitives::unit_cube(), catalog.at("cube")));
  const ss::RoomSpec room{2, 2, 2};
  ss::SceneLayout layout;
  const std::vector<ss::ObjectSpec> objs{{"f0", "cube", Vec3(0.5, 0.5, 0.5)}};
  ss::RelationAssignment rels{objs, std::vector<std::vector<ss::SpatialRelation>>(1)};
  layout.floor = ss::solve_group(objs, rels, ss::floor_surface(room, {}).grid, {}, 1);
  layout.asset_of["f0"] = "cube";
  const auto [scene, instances] = ss::build_scene(room, layout, lib);
  ASSERT_EQ(scene.mesh.triangles.size(), 22u);
  ASSERT_EQ(instances.size(), 1u);
  EXPECT_EQ(instances[0].instance_id, 1u);
  for (std::size_t t = 0; t < 22; ++t) EXPECT_EQ(scene.triangle_instance[t], t < 10 ? 0u : 1u);
}

TEST(SceneBuilder, VerticesMatchTransformOracle) {
  const auto catalog = cube_catalog({{"a", Vec3(0.4, 0.3, 0.5)}, {"b", Vec3(0.2, 0.6, 0.3)}, {"c", Vec3(0.3, 0.3, 0.3)}});
  ss::MeshLibrary lib(catalog);
  for (const auto& r : catalog.records()) lib.insert(r.asset_id, ss::canonicalize_mesh(wedge(), r));
  const ss::RoomSpec room{3, 3, 2.5};
  const auto floor = ss::floor_surface(room, {});
  ss::SceneLayout layout;
  const int qs[] = {0, 1, 3};
  const ss::Cell cells[] = {{0, 0}, {10, 4}, {20, 20}};
  const char* ids[] = {"a", "b", "c"};
  for (int k = 0; k < 3; ++k) {
    layout.floor.placements.push_back(
        ss::make_placement(ids[k], floor, catalog.at(ids[k]).target_dims, qs[k], cells[k]));
    layout.asset_of[ids[k]] = ids[k];
  }
  const auto [scene, instances] = ss::build_scene(room, layout, lib);
  ASSERT_EQ(instances.size(), 3u);
  std::size_t tri = 10;
  for (int k = 0; k < 3; ++k) {
    const auto& src = lib.get(ids[k]);
    const Vec3 dims = catalog.at(ids[k]).target_dims;
    // Footprint center computed from cell indices; rotation applied by hand.
    const bool swap = qs[k] % 2;
    const double w = std::ceil((swap ? dims.y() : dims.x()) / 0.1 - 1e-9) * 0.1;
    const double h = std::ceil((swap ? dims.x() : dims.y()) / 0.1 - 1e-9) * 0.1;
    const Vec3 centre(0.1 * cells[k].i + 0.5 * w, 0.1 * cells[k].j + 0.5 * h, 0);
    const double c[] = {1, 0, -1, 0}, s[] = {0, 1, 0, -1};
    std::size_t count = 0;
    for (; tri < scene.mesh.triangles.size() && scene.triangle_instance[tri] == static_cast<std::uint32_t>(k + 1);
         ++tri, ++count) {
      for (int corner = 0; corner < 3; ++corner) {
        const Vec3& v = src.vertices[src.triangles[count][corner]];
        const Vec3 expected(c[qs[k]] * v.x() - s[qs[k]] * v.y() + centre.x(),
                            s[qs[k]] * v.x() + c[qs[k]] * v.y() + centre.y(), v.z());
        EXPECT_LT((scene.mesh.vertices[scene.mesh.triangles[tri][corner]] - expected).norm(), 1e-9);
      }
    }
    EXPECT_EQ(count, src.triangles.size());
  }
}

TEST(SceneBuilder, OutOfRoomInstanceIsAnAssemblyError) {
  const auto catalog = cube_catalog({{"cube", Vec3(0.5, 0.5, 0.5)}});
  ss::MeshLibrary lib(catalog);
  lib.insert("cube", ss::canonicalize_mesh(ss::primitives::unit_cube(), catalog.at("cube")));
  ss::SceneInstance inst{1, "x", "cube", "cube", ss::SurfaceKind::floor, 0, Vec3(0.5, 0.5, 0.5), {}};
  inst.world_transform.translation = Vec3(0.1, 1, 0);  // half outside the west wall
  EXPECT_THROW(ss::assemble_scene({2, 2, 2}, {inst}, lib), ss::AssemblyError);
}

// ---------------------------------------------------------------------------
// Scan cells and vantage selection

TEST(ScanCells, EmptyRoomGivesFullMidHeightGrid) {
  const auto s = analytic::make_scene({1, 1, 3}, {});
  const auto cells = ss::candidate_scan_cells(s.mesh, s.room);
  ASSERT_EQ(cells.size(), 100u);
  for (const auto& c : cells) EXPECT_DOUBLE_EQ(c.z(), 1.5);
}

TEST(ScanCells, CentredObjectExcludesOneCell) {
  const auto s = analytic::make_scene({0.3, 0.3, 2}, {{Vec3(0.1, 0.1, 0), Vec3(0.2, 0.2, 0.5)}});
  const auto cells = ss::candidate_scan_cells(s.mesh, s.room);
  EXPECT_EQ(cells.size(), 8u);
  for (const auto& c : cells) EXPECT_FALSE(std::abs(c.x() - 0.15) < 1e-9 && std::abs(c.y() - 0.15) < 1e-9);
}

TEST(ScanCells, FullyCoveredRoomIsAnError) {
  const auto s = analytic::make_scene({1, 1, 2}, {{Vec3(0, 0, 0), Vec3(1, 1, 1)}});
  EXPECT_THROW(ss::candidate_scan_cells(s.mesh, s.room), ss::ScanError);
}

namespace {
std::vector<std::size_t> greedy_fps(const std::vector<Vec3>& pts, std::size_t k, std::size_t first) {
  std::vector<std::size_t> picks{first};
  while (picks.size() < std::min(k, pts.size())) {
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (auto p : picks) m = std::min(m, (pts[i] - pts[p]).squaredNorm());
      if (m > best) best = m, arg = i;
    }
    picks.push_back(arg);
  }
  return picks;
}
}  // namespace

TEST(FarthestPointSampling, SingleCandidate) {
  const std::vector<Vec3> pts{Vec3(1, 2, 3)};
  const auto out = ss::farthest_point_sampling(pts, 1, 9);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], pts[0]);
}

TEST(FarthestPointSampling, CollinearPicksEndsThenMiddle) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(i, 0, 0);
  std::uint64_t seed = 0;
  while (ss::farthest_point_sampling_indices(pts, 1, seed)[0] != 0) ++seed;
  const auto idx = ss::farthest_point_sampling_indices(pts, 3, seed);
  EXPECT_EQ(idx, greedy_fps(pts, 3, 0));
  EXPECT_EQ(idx[1], 9u);
  // Both 4 and 5 are 4.5 from an end; the lower index wins.
  EXPECT_EQ(idx[2], 4u);
}

TEST(FarthestPointSampling, MatchesGreedyOracleOnRandomSets) {
  ss::Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<Vec3> pts(200);
    for (auto& p : pts) p = Vec3(rng.uniform(0, 5), rng.uniform(0, 5), 0);
    const auto idx = ss::farthest_point_sampling_indices(pts, 5, t);
    EXPECT_EQ(idx, greedy_fps(pts, 5, idx[0]));
  }
}

TEST(FarthestPointSampling, EmptyIsAnError) {
  EXPECT_THROW(ss::farthest_point_sampling(std::vector<Vec3>{}, 5, 1), ss::InvalidArgument);
}

// ---------------------------------------------------------------------------
// Rendering

TEST(Render, WallAtTwoMetres) {
  const auto s = analytic::make_scene({4, 4, 3}, {});
  const ss::ScanTarget target(s.mesh);
  const auto k = ss::CameraIntrinsics::from_fov(65, 49, 60);
  const ss::CameraPose pose{Vec3(2, 2, 1.5), 0, 0};  // looking at the north wall, y = 4
  const auto img = ss::render_depth(target, pose, k);
  EXPECT_NEAR(img.depth[img.index(32, 24)], 2.0, 1e-6);
  EXPECT_EQ(img.instance[img.index(32, 24)], 0u);
}

TEST(Render, SkyPixelsHaveZeroDepth) {
  const auto s = analytic::make_scene({4, 4, 3}, {});
  const ss::ScanTarget target(s.mesh);
  const auto k = ss::CameraIntrinsics::from_fov(64, 48, 60);
  const auto img = ss::render_depth(target, {Vec3(2, 2, 1.5), 0, 89}, k);
  EXPECT_EQ(img.depth[img.index(32, 24)], 0.0);
  EXPECT_GT(img.depth.size() - img.valid_count(), img.depth.size() / 2);
}

TEST(Render, MatchesBruteForceRaycast) {
  const auto s = analytic::make_scene({3, 3, 2.5}, {{Vec3(1, 1.8, 0), Vec3(2, 2.8, 1)}});
  const ss::ScanTarget target(s.mesh);
  const auto k = ss::CameraIntrinsics::from_fov(64, 48, 70);
  for (double yaw : {0.0, 30.0, 200.0}) {
    const ss::CameraPose pose{Vec3(1.2, 0.5, 1.3), yaw, -10};
    const auto img = ss::render_depth(target, pose, k, 20, 2);
    const auto ref = analytic::brute_render(s.mesh, pose, k, 20);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ASSERT_NEAR(img.depth[i], ref[i].depth, 1e-9) << "pixel " << i;
      if (ref[i].runner_up - ref[i].depth > 1e-9) {
        ASSERT_EQ(img.instance[i], ref[i].instance) << "pixel " << i;
      }
    }
  }
}

TEST(Render, MaxRangeCutsDistantHits) {
  const auto s = analytic::make_scene({4, 4, 3}, {});
  const ss::ScanTarget target(s.mesh);
  const auto k = ss::CameraIntrinsics::from_fov(65, 49, 60);
  const auto img = ss::render_depth(target, {Vec3(2, 2, 1.5), 0, 0}, k, 1.5);
  EXPECT_EQ(img.valid_count(), 0u);
}

// ---------------------------------------------------------------------------
// Scan, fusion

TEST(Scan, SixtyViewsOverFiveVantages) {
  const auto s = analytic::make_scene({3, 3, 2.5}, {{Vec3(1, 1, 0), Vec3(1.5, 1.5, 0.8)}});
  const ss::ScanTarget target(s.mesh);
  ss::ScanOptions opt;
  opt.intrinsics = ss::CameraIntrinsics::from_fov(16, 12, 60);
  const auto views = ss::scan_scene(target, s.room, opt, 42);
  ASSERT_EQ(views.size(), 60u);
  std::set<std::tuple<double, double, double>> positions;
  for (std::size_t v = 0; v < 5; ++v) {
    std::multiset<double> yaws;
    for (std::size_t y = 0; y < 12; ++y) {
      const auto& view = views[v * 12 + y];
      EXPECT_EQ(view.vantage, v);
      EXPECT_EQ(view.yaw_index, y);
      yaws.insert(view.pose.yaw_deg);
      positions.insert({view.pose.position.x(), view.pose.position.y(), view.pose.position.z()});
    }
    std::multiset<double> expected;
    for (int y = 0; y < 12; ++y) expected.insert(30.0 * y);
    EXPECT_EQ(yaws, expected);
  }
  EXPECT_EQ(positions.size(), 5u);
  const auto again = ss::scan_poses(s.mesh, s.room, opt, 42);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(again[i].position, views[i].pose.position);
}

TEST(Fuse, CentrePixelBackprojectsAlongForward) {
  const auto k = ss::CameraIntrinsics::from_fov(65, 49, 60);
  ss::ScanView view;
  view.image = ss::DepthImage(65, 49);
  view.image.depth[view.image.index(32, 24)] = 2.0;
  view.image.instance[view.image.index(32, 24)] = 7;
  const auto cloud = ss::backproject_and_fuse({view}, k);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_LT((cloud.points[0] - Vec3(0, 2, 0)).norm(), 1e-9);
  EXPECT_EQ(cloud.instance_ids[0], 7u);
}

TEST(Fuse, AllInvalidImagesGiveEmptyCloud) {
  const auto k = ss::CameraIntrinsics::from_fov(8, 6, 60);
  ss::ScanView view;
  view.image = ss::DepthImage(8, 6);
  EXPECT_TRUE(ss::backproject_and_fuse({view, view}, k).empty());
}

TEST(Fuse, PointsLieOnAnalyticSurfacesAndReproject) {
  const auto s = analytic::make_scene({3, 3, 2.5}, {{Vec3(1.2, 1.4, 0), Vec3(1.7, 1.9, 0.6)}});
  const ss::ScanTarget target(s.mesh);
  ss::ScanOptions opt;
  opt.intrinsics = ss::CameraIntrinsics::from_fov(32, 24, 60);
  opt.pitch_deg = -15;
  const auto views = ss::scan_scene(target, s.room, opt, 1);
  const auto cloud = ss::backproject_and_fuse(views, opt.intrinsics);
  ASSERT_GT(cloud.size(), 0u);
  std::size_t n = 0;
  for (const auto& view : views) {
    for (int v = 0; v < view.image.height; ++v) {
      for (int u = 0; u < view.image.width; ++u) {
        if (!(view.image.depth[view.image.index(u, v)] > 0)) continue;
        const Vec3& p = cloud.points[n++];
        EXPECT_LT(s.surface_distance(p), 1e-4);
        const Vec3 c = view.pose.to_camera(p);
        const double pu = opt.intrinsics.fx * c.x() / c.z() + opt.intrinsics.cx;
        const double pv = opt.intrinsics.fy * c.y() / c.z() + opt.intrinsics.cy;
        EXPECT_LT(std::abs(pu - u), 0.5);
        EXPECT_LT(std::abs(pv - v), 0.5);
      }
    }
  }
  EXPECT_EQ(n, cloud.size());
}

// ---------------------------------------------------------------------------
// Voxel downsampling

namespace {
ss::LabeledPointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  ss::Rng rng(seed);
  ss::LabeledPointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(0, extent));
    c.instance_ids.push_back(static_cast<std::uint32_t>(rng.uniform_index(5)));
    c.colors.push_back({static_cast<std::uint8_t>(i), 0, 0});
  }
  return c;
}

std::tuple<long, long, long> cell_of(const Vec3& p, double v) {
  return {static_cast<long>(std::floor(p.x() / v)), static_cast<long>(std::floor(p.y() / v)),
          static_cast<long>(std::floor(p.z() / v))};
}
}  // namespace

TEST(Voxel, OneVoxelKeepsOneInputPoint) {
  ss::LabeledPointCloud c;
  for (int i = 0; i < 10; ++i) {
    c.points.emplace_back(0.001 * i, 0.002, 0.003);
    c.instance_ids.push_back(i);
  }
  const auto out = ss::voxel_downsample(c, 0.02, 5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NE(std::find(c.points.begin(), c.points.end(), out.points[0]), c.points.end());
}

TEST(Voxel, EmptyCloud) { EXPECT_TRUE(ss::voxel_downsample({}, 0.02, 1).empty()); }

TEST(Voxel, RejectsNonPositiveSize) {
  EXPECT_THROW(ss::voxel_downsample({}, 0.0, 1), ss::InvalidArgument);
}

TEST(Voxel, CountMatchesOccupiedVoxelSet) {
  const auto c = random_cloud(1000, 0.5, 8);
  std::set<std::tuple<long, long, long>> occupied;
  for (const auto& p : c.points) occupied.insert(cell_of(p, 0.1));
  const auto out = ss::voxel_downsample(c, 0.1, 3);
  EXPECT_EQ(out.size(), occupied.size());
  std::set<std::tuple<long, long, long>> seen;
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_TRUE(seen.insert(cell_of(out.points[i], 0.1)).second);
    // Subset, with the label and color carried along.
    const auto it = std::find(c.points.begin(), c.points.end(), out.points[i]);
    ASSERT_NE(it, c.points.end());
    const auto j = static_cast<std::size_t>(it - c.points.begin());
    EXPECT_EQ(out.instance_ids[i], c.instance_ids[j]);
    EXPECT_EQ(out.colors[i], c.colors[j]);
  }
}

TEST(Voxel, ThreadCountDoesNotChangeOutput) {
  const auto c = random_cloud(20000, 1.0, 4);
  const auto a = ss::voxel_downsample(c, 0.05, 11, 1);
  for (std::size_t t : {2u, 3u, 8u}) {
    const auto b = ss::voxel_downsample(c, 0.05, 11, t);
    ASSERT_EQ(a.points, b.points);
    EXPECT_EQ(a.instance_ids, b.instance_ids);
  }
}

// ---------------------------------------------------------------------------
// Labels

TEST(Labels, HitIdModeIsIdentity) {
  const auto s = analytic::make_scene({2, 2, 2}, {{Vec3(0.5, 0.5, 0), Vec3(1, 1, 0.5)}});
  const ss::ScanTarget target(s.mesh);
  const auto c = random_cloud(50, 1.0, 2);
  EXPECT_EQ(ss::assign_labels(c, target, ss::LabelMode::hit_id).instance_ids, c.instance_ids);
}

TEST(Labels, NearestSurfaceAgreesWithHitIds) {
  const auto s = analytic::make_scene(
      {3, 3, 2.5}, {{Vec3(0.8, 0.8, 0), Vec3(1.3, 1.3, 0.7)}, {Vec3(1.8, 1.6, 0), Vec3(2.2, 2.4, 1.0)}});
  const ss::ScanTarget target(s.mesh);
  ss::ScanOptions opt;
  opt.intrinsics = ss::CameraIntrinsics::from_fov(24, 18, 60);
  const auto cloud = ss::backproject_and_fuse(ss::scan_scene(target, s.room, opt, 5), opt.intrinsics);
  const auto labeled = ss::assign_labels(cloud, target, ss::LabelMode::nearest_surface, 2);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    // Distance to every other instance's surface, from the analytic faces.
    double other = std::numeric_limits<double>::infinity();
    const auto hit = cloud.instance_ids[i];
    if (hit != 0) {
      for (const auto& f : analytic::room_faces(s.room)) other = std::min(other, f.distance(p));
    }
    for (std::size_t b = 0; b < s.boxes.size(); ++b) {
      if (b + 1 == hit) continue;
      for (const auto& f : analytic::box_faces(s.boxes[b].first, s.boxes[b].second)) {
        other = std::min(other, f.distance(p));
      }
    }
    if (other < 1e-3) continue;
    ++checked;
    ASSERT_EQ(labeled.instance_ids[i], hit) << "point " << i;
  }
  EXPECT_GT(checked, cloud.size() / 2);
}

TEST(Labels, EquidistantPointTakesLowestId) {
  const auto s = analytic::make_scene(
      {4, 4, 3}, {{Vec3(2.2, 1.8, 1.0), Vec3(2.4, 2.2, 1.4)}, {Vec3(1.6, 1.8, 1.0), Vec3(1.8, 2.2, 1.4)}});
  const ss::ScanTarget target(s.mesh);
  EXPECT_EQ(ss::nearest_instance(target, Vec3(2.0, 2.0, 1.2)), 1u);
  EXPECT_EQ(ss::nearest_instance(target, Vec3(2.05, 2.0, 1.2)), 1u);
  EXPECT_EQ(ss::nearest_instance(target, Vec3(1.95, 2.0, 1.2)), 2u);
}
