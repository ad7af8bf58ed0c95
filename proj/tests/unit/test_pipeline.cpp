#include "scenesynth/pipeline.hpp"

#include "support/test_util.hpp"

#include <gtest/gtest.h>

#include <map>

namespace ss = scenesynth;
using ss::Vec3;

namespace {

using Tree = std::map<std::string, std::vector<std::uint8_t>>;

Tree read_tree(const std::filesystem::path& root) {
  Tree t;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) t[std::filesystem::relative(e.path(), root).string()] = ss::read_bytes(e.path());
  }
  return t;
}

nlohmann::json small_config(const std::filesystem::path& out) {
  return {{"asset_manifest", testutil::fixture_catalog().string()},
          {"scene_count", 2},
          {"M1", 3},
          {"M2", 2},
          {"per_support_count", 2},
          {"real_class_list", {"table", "chair", "cabinet", "painting", "tv", "book", "mug"}},
          {"room", {{"width", 4.0}, {"depth", 4.0}, {"height", 2.6}}},
          {"intrinsics", {{"width", 48}, {"height", 36}, {"horizontal_fov_deg", 60}}},
          {"budget", {{"max_nodes", 5000}, {"max_saved_solutions", 50}}},
          {"master_seed", 11},
          {"output_dir", out.string()}};
}

ss::SynthResult run(const nlohmann::json& cfg) {
  const ss::PipelineContext ctx(ss::config_from_json(cfg));
  return ss::synth(ctx);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultsAndOverrides) {
  const auto c = ss::config_from_json({{"asset_manifest", "cat/manifest.json"}}, "/data/cfg");
  EXPECT_EQ(c.asset_manifest, "/data/cfg/cat/manifest.json");
  EXPECT_EQ(c.scene_count, 2000u);
  EXPECT_EQ(c.vantage_count, 5u);
  EXPECT_EQ(c.yaw_steps, 12u);
  EXPECT_FALSE(c.fixed_mode);
  EXPECT_DOUBLE_EQ(c.training_balance_alpha, 0.5);

  const auto d = ss::config_from_json({{"asset_manifest", "/abs.json"},
                                       {"selection_mode", "complementary"},
                                       {"scan", {{"vantage_count", 3}}},
                                       {"intrinsics", {{"width", 64}, {"height", 48}, {"horizontal_fov_deg", 90}}}});
  EXPECT_EQ(d.asset_manifest, "/abs.json");
  EXPECT_EQ(d.fixed_mode, ss::SelectionMode::complementary);
  EXPECT_EQ(d.vantage_count, 3u);
  EXPECT_NEAR(d.intrinsics.fx, 32.0, 1e-12);
  EXPECT_NEAR(d.intrinsics.cx, 31.5, 1e-12);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(ss::config_from_json({{"asset_manifest", "a"}, {"scene_cuont", 3}}), ss::ConfigError);
  try {
    ss::config_from_json({{"asset_manifest", "a"}, {"room", {{"widht", 3}}}});
    FAIL() << "no error";
  } catch (const ss::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("room.widht"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ss::config_from_json({{"asset_manifest", "a"}, {"relation_backend", {{"host", "x"}}}}),
               ss::ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  const nlohmann::json base = {{"asset_manifest", "a"}};
  auto with = [&](const char* k, nlohmann::json v) {
    auto j = base;
    j[k] = std::move(v);
    return j;
  };
  EXPECT_THROW(ss::config_from_json(nlohmann::json::object()), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("scene_count", 0)), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("scene_count", "many")), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("training_balance_alpha", 1.5)), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("voxel_size", 0)), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("selection_mode", "paired")), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("relation_backend", {{"kind", "oracle"}})), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("relation_backend", {{"kind", "http"}})), ss::ConfigError);
  EXPECT_THROW(ss::config_from_json(with("grid", {{"wall_min_height", 5.0}})), ss::ConfigError);
}

TEST(Config, LoadConfigErrors) {
  testutil::TempDir dir;
  testutil::write_text(dir / "bad.json", "{ \"scene_count\": ");
  EXPECT_THROW(ss::load_config(dir / "bad.json"), ss::ConfigError);
  EXPECT_THROW(ss::load_config(dir / "missing.json"), ss::ConfigError);
  testutil::write_text(dir / "ok.json", R"({"asset_manifest": "c/m.json", "output_dir": "out"})");
  const auto c = ss::load_config(dir / "ok.json");
  EXPECT_EQ(c.output_dir, (dir / "out").string());
}

TEST(Config, EchoLeavesOutRunSettings) {
  auto a = ss::config_from_json({{"asset_manifest", "a"}, {"parallelism", 1}, {"output_dir", "x"}});
  auto b = ss::config_from_json({{"asset_manifest", "a"}, {"parallelism", 8}, {"output_dir", "y"}});
  EXPECT_EQ(ss::config_echo(a), ss::config_echo(b));
  EXPECT_FALSE(ss::config_echo(a).contains("parallelism"));
  auto c = ss::config_from_json({{"asset_manifest", "a"}, {"master_seed", 3}});
  EXPECT_NE(ss::config_echo(a), ss::config_echo(c));
}

// ---------------------------------------------------------------------------
// Synthesis

TEST(Synth, RerunIsByteIdentical) {
  testutil::TempDir dir;
  const auto r1 = run(small_config(dir / "a"));
  const auto r2 = run(small_config(dir / "b"));
  ASSERT_EQ(r1.manifest.scenes.size(), 2u);
  EXPECT_TRUE(r1.manifest.failed_scenes.empty());
  const auto t1 = read_tree(dir / "a");
  EXPECT_EQ(t1.size(), 7u);  // manifest + 2 x 3 scene files
  EXPECT_TRUE(t1 == read_tree(dir / "b"));

  for (const auto& rep : r1.reports) {
    EXPECT_EQ(rep.floor.candidates, 3u);
    EXPECT_EQ(rep.wall.candidates, 2u);
    EXPECT_LE(rep.floor.placed, 3u);
    EXPECT_EQ(rep.view_count, 60u);
  }
  const auto v = ss::validate_dataset(dir / "a");
  EXPECT_TRUE(v.ok()) << v.issues.front().message;
  EXPECT_EQ(v.scenes_checked, 2u);
}

TEST(Synth, SeedChangesOutput) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "a");
  run(cfg);
  cfg["master_seed"] = 12;
  cfg["output_dir"] = (dir / "b").string();
  run(cfg);
  EXPECT_FALSE(read_tree(dir / "a") == read_tree(dir / "b"));
}

TEST(Synth, ParallelismDoesNotChangeBytes) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "serial");
  cfg["scene_count"] = 3;
  run(cfg);
  cfg["parallelism"] = 4;
  cfg["output_dir"] = (dir / "parallel").string();
  run(cfg);
  EXPECT_TRUE(read_tree(dir / "serial") == read_tree(dir / "parallel"));
}

TEST(Synth, ModesAlternateByIndex) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "a");
  cfg["scene_count"] = 4;
  const auto r = run(cfg);
  ASSERT_EQ(r.manifest.scenes.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto meta = ss::read_json_file(dir / "a" / r.manifest.scenes[i].path / "meta.json");
    EXPECT_EQ(meta["selection_mode"], i % 2 == 0 ? "uniform" : "complementary") << i;
    EXPECT_EQ(meta["scene_index"], i);
  }
}

TEST(Synth, InstanceIdsFollowGroupOrder) {
  testutil::TempDir dir;
  const auto r = run(small_config(dir / "a"));
  for (const auto& e : r.manifest.scenes) {
    const auto s = ss::load_scene(dir / "a" / e.path);
    int last_rank = 0;
    for (std::size_t i = 0; i < s.sample.instances.size(); ++i) {
      const auto& inst = s.sample.instances[i];
      EXPECT_EQ(inst.instance_id, i + 1);
      const int rank = static_cast<int>(inst.surface_kind);
      EXPECT_GE(rank, last_rank);
      last_rank = rank;
    }
  }
}

TEST(Synth, TooManyFailuresAbort) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "a");
  // A room smaller than one scan cell leaves no camera position.
  cfg["room"] = {{"width", 0.05}, {"depth", 0.05}, {"height", 2.6}};
  cfg["max_failure_rate"] = 0.5;
  EXPECT_THROW(run(cfg), ss::PipelineAbort);
  EXPECT_FALSE(std::filesystem::exists(dir / "a" / "manifest.json"));
  cfg["max_failure_rate"] = 1.0;
  const auto r = run(cfg);
  EXPECT_EQ(r.manifest.failed_scenes.size(), 2u);
  EXPECT_TRUE(r.manifest.scenes.empty());
}

// ---------------------------------------------------------------------------
// Validation

TEST(Validate, FlagsExactlyTheEditedScene) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "a");
  cfg["scene_count"] = 3;
  const auto r = run(cfg);
  const auto path = dir / "a" / r.manifest.scenes[1].path / "instances.json";
  auto j = ss::read_json_file(path);
  ASSERT_FALSE(j["instances"].empty());
  j["instances"].erase(j["instances"].size() - 1);
  ss::write_json_file(path, j);
  const auto v = ss::validate_dataset(dir / "a");
  EXPECT_FALSE(v.ok());
  EXPECT_EQ(v.scenes_with_issues(), std::set<std::string>{r.manifest.scenes[1].scene_id});
}

TEST(Validate, DetectsOverlapAndCorruptPly) {
  testutil::TempDir dir;
  auto cfg = small_config(dir / "a");
  const auto r = run(cfg);
  const auto s0 = dir / "a" / r.manifest.scenes[0].path;
  auto j = ss::read_json_file(s0 / "instances.json");
  ASSERT_GE(j["instances"].size(), 2u);
  j["instances"][1]["transform"] = j["instances"][0]["transform"];
  j["instances"][1]["dims"] = j["instances"][0]["dims"];
  ss::write_json_file(s0 / "instances.json", j);

  const auto s1 = dir / "a" / r.manifest.scenes[1].path / "points.ply";
  auto bytes = ss::read_bytes(s1);
  bytes.pop_back();
  ss::write_file(s1, bytes);

  const auto v = ss::validate_dataset(dir / "a");
  EXPECT_EQ(v.scenes_with_issues().size(), 2u);
  bool overlap = false;
  for (const auto& i : v.issues) overlap = overlap || i.message.find("overlap") != std::string::npos;
  EXPECT_TRUE(overlap);
}

TEST(Validate, MissingManifestIsAnIssue) {
  testutil::TempDir dir;
  const auto v = ss::validate_dataset(dir.path());
  EXPECT_FALSE(v.ok());
  EXPECT_EQ(v.scenes_checked, 0u);
}

// ---------------------------------------------------------------------------
// Dataset metrics

namespace {

// Hand-built dataset: three scenes holding {table, chair}, {table, cabinet}
// and {chair, cabinet}.
void write_class_fixture(const std::filesystem::path& root) {
  const std::vector<std::vector<std::pair<std::string, std::string>>> scenes = {
      {{"table_00", "table"}, {"chair_00", "chair"}},
      {{"table_01", "table"}, {"cabinet_00", "cabinet"}},
      {{"chair_01", "chair"}, {"cabinet_01", "cabinet"}}};
  const auto catalog = ss::load_catalog(testutil::fixture_catalog());
  ss::DatasetManifest m;
  m.config = {{"asset_manifest", testutil::fixture_catalog().string()}};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    ss::SceneSample s;
    s.scene_id = ss::scene_name(i);
    s.room = {4, 4, 2.6};
    std::uint32_t id = 1;
    for (const auto& [asset, cls] : scenes[i]) {
      ss::InstanceRecord r;
      r.instance_id = id;
      r.object_id = "floor:" + std::to_string(id - 1);
      r.class_name = cls;
      r.asset_id = asset;
      r.dims = catalog.at(asset).target_dims;
      r.transform.translation = Vec3(1.0 + 2.0 * (id - 1), 2.0, 0.0);
      s.instances.push_back(r);
      ++id;
    }
    ss::export_scene(root / "scenes" / s.scene_id, s, ss::LabeledPointCloud{});
    m.scenes.push_back({s.scene_id, "scenes/" + s.scene_id});
  }
  ss::export_manifest(root, m);
}

}  // namespace

TEST(DatasetMetrics, ThreeSceneFixture) {
  testutil::TempDir dir;
  write_class_fixture(dir.path());
  ss::MetricsOptions opt;
  opt.k = 2;
  opt.descriptor_samples = 2000;
  const auto rep = ss::compute_dataset_metrics(dir.path(), opt);
  EXPECT_DOUBLE_EQ(rep.context_complexity, 0.5);
  EXPECT_GT(rep.geometry_diversity_entropy, 0.0);
  EXPECT_LE(rep.geometry_diversity_entropy, std::log(2.0) + 1e-12);
  EXPECT_TRUE(rep.layout_scores.empty());
  EXPECT_TRUE(ss::validate_dataset(dir.path()).ok());
}

TEST(DatasetMetrics, KLargerThanObjectsIsAnError) {
  testutil::TempDir dir;
  write_class_fixture(dir.path());
  ss::MetricsOptions opt;
  opt.k = 32;
  opt.descriptor_samples = 200;
  EXPECT_THROW(ss::compute_dataset_metrics(dir.path(), opt), ss::InvalidArgument);
}

TEST(DatasetMetrics, OverviewPosesLookAtRoomCenter) {
  const ss::RoomSpec room{4, 6, 3};
  for (const auto& p : ss::overview_poses(room)) {
    const Vec3 f = p.rotation() * Vec3(0, 0, 1);  // camera optical axis
    const Vec3 to = Vec3(2, 3, p.position.z()) - p.position;
    EXPECT_NEAR(std::atan2(f.y(), f.x()), std::atan2(to.y(), to.x()), 1e-9);
    EXPECT_LT(f.z(), 0.0);
    EXPECT_TRUE(room.box().contains(ss::Aabb{p.position, p.position}));
  }
}
