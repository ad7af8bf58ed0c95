#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/geometry_features.hpp"

#include "support/test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace ss = scenesynth;
using ss::Vec3;
using testutil::TempDir;

namespace {

const char* kCubeObj =
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
    "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\n"
    "f 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

nlohmann::json record(const std::string& id, const std::string& cls, const std::string& group,
                      const std::string& mesh = "cube.obj") {
  return {{"asset_id", id}, {"class_name", cls}, {"group", group}, {"mesh_path", mesh},
          {"target_dims", {1, 1, 1}}, {"front_axis", "+y"}};
}

std::filesystem::path write_manifest(const TempDir& dir, const nlohmann::json& j) {
  testutil::write_text(dir / "cube.obj", kCubeObj);
  const auto p = dir / "manifest.json";
  testutil::write_text(p, j.dump());
  return p;
}

ss::AssetRecord rec(ss::FrontAxis axis, Vec3 dims = Vec3(1, 1, 1)) {
  return {"a", "a", ss::Group::floor, "a.obj", dims, axis};
}

// Unit cube with a spike on its +x face, so orientation is observable.
ss::TriangleMesh marked_cube() {
  auto m = ss::primitives::unit_cube();
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.insert(m.vertices.end(), {{1, 0.4, 0.4}, {1, 0.6, 0.4}, {1, 0.5, 0.6}, {1.5, 0.5, 0.5}});
  m.triangles.push_back({base, base + 1, base + 3});
  m.triangles.push_back({base + 1, base + 2, base + 3});
  m.triangles.push_back({base + 2, base, base + 3});
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Catalog

TEST(Catalog, OneRecordPerGroup) {
  TempDir dir;
  const auto cat = ss::load_catalog(write_manifest(
      dir, {record("t", "table", "floor"), record("p", "painting", "wall"), record("m", "mug", "obj")}));
  EXPECT_EQ(cat.group(ss::Group::floor).size(), 1u);
  EXPECT_EQ(cat.group(ss::Group::wall).size(), 1u);
  EXPECT_EQ(cat.group(ss::Group::obj).size(), 1u);
  EXPECT_EQ(cat.by_class("mug").size(), 1u);
}

TEST(Catalog, DuplicateIdIsAnError) {
  TempDir dir;
  const auto p = write_manifest(dir, {record("chair_01", "chair", "floor"), record("chair_01", "chair", "floor")});
  try {
    ss::load_catalog(p);
    FAIL() << "expected CatalogError";
  } catch (const ss::CatalogError& e) {
    EXPECT_NE(std::string(e.what()).find("chair_01"), std::string::npos);
  }
}

TEST(Catalog, MissingMeshListsOffendingIds) {
  TempDir dir;
  const auto p = write_manifest(dir, {record("ok", "a", "floor"), record("gone1", "a", "floor", "nope.obj"),
                                      record("gone2", "a", "wall", "nope2.obj")});
  try {
    ss::load_catalog(p);
    FAIL() << "expected CatalogError";
  } catch (const ss::CatalogError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("gone1"), std::string::npos);
    EXPECT_NE(msg.find("gone2"), std::string::npos);
    EXPECT_EQ(msg.find("ok,"), std::string::npos);
  }
}

TEST(Catalog, UnknownGroupIsAnError) {
  TempDir dir;
  EXPECT_THROW(ss::load_catalog(write_manifest(dir, {record("x", "a", "ceiling")})), ss::CatalogError);
}

TEST(Catalog, NonPositiveDimsAreRejected) {
  auto j = record("x", "a", "floor");
  j["target_dims"] = {1, 0, 1};
  EXPECT_THROW(ss::record_from_json(j), ss::CatalogError);
}

TEST(Catalog, FixtureGroupCountsMatchManifest) {
  const auto cat = ss::load_catalog(testutil::fixture_catalog());
  // Count straight from the JSON.
  std::map<std::string, std::size_t> counts;
  for (const auto& r : nlohmann::json::parse(testutil::read_text(testutil::fixture_catalog()))) {
    ++counts[r["group"].get<std::string>()];
  }
  EXPECT_EQ(cat.size(), 50u);
  EXPECT_EQ(cat.group(ss::Group::floor).size(), counts["floor"]);
  EXPECT_EQ(cat.group(ss::Group::wall).size(), counts["wall"]);
  EXPECT_EQ(cat.group(ss::Group::obj).size(), counts["obj"]);
  EXPECT_EQ(counts["floor"], 15u);
  EXPECT_EQ(counts["wall"], 10u);
  EXPECT_EQ(counts["obj"], 25u);
}

TEST(Catalog, FixtureMeshesLoadToTheirTargetBoxes) {
  const auto cat = ss::load_catalog(testutil::fixture_catalog());
  for (const auto& r : cat.records()) {
    const auto m = ss::load_mesh(cat, r);
    const auto b = m.bounds();
    EXPECT_LT((b.size() - r.target_dims).norm(), 1e-9) << r.asset_id;
    EXPECT_NEAR(b.min.z(), 0.0, 1e-12) << r.asset_id;
    EXPECT_NEAR(b.center().x(), 0.0, 1e-9) << r.asset_id;
    EXPECT_NEAR(b.center().y(), 0.0, 1e-9) << r.asset_id;
  }
}

// ---------------------------------------------------------------------------
// Mesh canonicalization

TEST(LoadMesh, UnitCubeRescaledToTarget) {
  const auto m = ss::canonicalize_mesh(ss::primitives::unit_cube(), rec(ss::FrontAxis::pos_y, Vec3(2, 2, 2)));
  const auto b = m.bounds();
  EXPECT_EQ(b.min, Vec3(-1, -1, 0));
  EXPECT_EQ(b.max, Vec3(1, 1, 2));
}

TEST(LoadMesh, NegXFrontIsPosXFrontTurnedHalfway) {
  const auto from_pos = ss::canonicalize_mesh(marked_cube(), rec(ss::FrontAxis::pos_x));
  const auto from_neg = ss::canonicalize_mesh(marked_cube(), rec(ss::FrontAxis::neg_x));
  ASSERT_EQ(from_pos.vertices.size(), from_neg.vertices.size());
  for (std::size_t i = 0; i < from_pos.vertices.size(); ++i) {
    const Vec3& p = from_pos.vertices[i];
    const Vec3 turned(-p.x(), -p.y(), p.z());
    EXPECT_LT((from_neg.vertices[i] - turned).norm(), 1e-9) << i;
  }
}

TEST(LoadMesh, FrontAxisEndsUpFacingPlusY) {
  // The spike marks the authored front (+x); after loading it must point +y.
  const auto m = ss::canonicalize_mesh(marked_cube(), rec(ss::FrontAxis::pos_x, Vec3(1, 1.5, 1)));
  const Vec3 tip = m.vertices.back();
  EXPECT_NEAR(tip.y(), 0.75, 1e-9);
  EXPECT_NEAR(tip.x(), 0.0, 1e-9);
}

TEST(LoadMesh, ZeroAreaTriangleDropped) {
  auto m = ss::primitives::unit_cube();
  const std::size_t before = m.triangles.size();
  m.triangles.push_back({0, 1, 1});
  const auto out = ss::canonicalize_mesh(m, rec(ss::FrontAxis::pos_y));
  EXPECT_EQ(out.triangles.size(), before);
}

TEST(LoadMesh, EmptyAndUnparseableMeshesAreFormatErrors) {
  EXPECT_THROW(ss::canonicalize_mesh({}, rec(ss::FrontAxis::pos_y)), ss::FormatError);
  std::istringstream bad("v 0 0\n");
  EXPECT_THROW(ss::parse_obj(bad), ss::FormatError);
  std::istringstream bad_face("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n");
  EXPECT_THROW(ss::parse_obj(bad_face), ss::FormatError);
}

TEST(LoadMesh, ObjRoundTripKeepsGeometry) {
  TempDir dir;
  auto m = ss::primitives::uv_sphere(Vec3(0, 0, 1), 0.5, 6, 8);
  ss::primitives::paint(m, Vec3(0.25, 0.5, 0.75));
  ss::write_obj(dir / "s.obj", m);
  const auto back = ss::read_obj(dir / "s.obj");
  ASSERT_EQ(back.vertices.size(), m.vertices.size());
  ASSERT_EQ(back.triangles, m.triangles);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    EXPECT_LT((back.vertices[i] - m.vertices[i]).norm(), 1e-9);
  }
  EXPECT_EQ(back.vertex_colors.size(), m.vertices.size());
}

// ---------------------------------------------------------------------------
// Shape descriptors

TEST(Descriptor, HistogramIsNormalized) {
  const auto d = ss::compute_descriptor(ss::primitives::uv_sphere(Vec3::Zero(), 1.0, 12, 24), 512, 3);
  EXPECT_NEAR(d.sum(), 1.0, 1e-12);
  for (double v : d.histogram) EXPECT_GE(v, 0.0);
}

TEST(Descriptor, AxisAlignedRotationLeavesHistogramUnchanged) {
  const auto along_x = ss::primitives::box(Vec3(0, 0, 0), Vec3(2, 0.05, 0.05));
  auto along_y = along_x;
  along_y.transform({ss::quarter_turn_rotation(1), Vec3::Zero()});
  const auto a = ss::compute_descriptor(along_x, 2048, 9);
  const auto b = ss::compute_descriptor(along_y, 2048, 9);
  EXPECT_LT(a.l1_distance(b), 0.02);
}

TEST(Descriptor, DifferentShapesDiffer) {
  const auto line = ss::compute_descriptor(ss::primitives::box(Vec3(0, 0, 0), Vec3(2, 0.05, 0.05)), 1024, 1);
  const auto ball = ss::compute_descriptor(ss::primitives::uv_sphere(Vec3::Zero(), 1.0, 12, 24), 1024, 1);
  EXPECT_GT(line.l1_distance(ball), 0.3);
}

TEST(Descriptor, Preconditions) {
  EXPECT_THROW(ss::compute_descriptor(ss::primitives::unit_cube(), 1, 0), ss::InvalidArgument);
  auto tiny = ss::primitives::box(Vec3::Zero(), Vec3::Constant(1e-11));
  EXPECT_THROW(ss::compute_descriptor(tiny, 64, 0), ss::InvalidArgument);
}

TEST(Descriptor, CacheRoundTripAndParameterCheck) {
  TempDir dir;
  ss::DescriptorCache c;
  c.sample_count = 256;
  c.seed = 4;
  c.descriptors["a"] = ss::compute_descriptor(ss::primitives::unit_cube(), 256, 4);
  c.save(dir / "cache.json");
  const auto back = ss::DescriptorCache::load_if_compatible(dir / "cache.json", 256, 4);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->descriptors.at("a"), c.descriptors.at("a"));
  EXPECT_FALSE(ss::DescriptorCache::load_if_compatible(dir / "cache.json", 512, 4));
  EXPECT_FALSE(ss::DescriptorCache::load_if_compatible(dir / "missing.json", 256, 4));
}

// ---------------------------------------------------------------------------
// k-means and entropy

namespace {
ss::ShapeDescriptor spike(std::size_t bin, double jitter = 0) {
  ss::ShapeDescriptor d;
  d.histogram[bin] = 1.0 - jitter;
  d.histogram[(bin + 1) % ss::kDescriptorBins] = jitter;
  return d;
}

double sse(const std::vector<ss::ShapeDescriptor>& data, const std::vector<int>& label, int k) {
  double total = 0;
  for (int c = 0; c < k; ++c) {
    ss::ShapeDescriptor mean;
    int n = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (label[i] != c) continue;
      ++n;
      for (std::size_t b = 0; b < ss::kDescriptorBins; ++b) mean.histogram[b] += data[i].histogram[b];
    }
    if (n == 0) return std::numeric_limits<double>::infinity();
    for (auto& v : mean.histogram) v /= n;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (label[i] == c) total += data[i].squared_distance(mean);
    }
  }
  return total;
}
}  // namespace

TEST(KMeans, IdenticalPointsGiveThatCentroid) {
  const std::vector<ss::ShapeDescriptor> data(5, spike(7, 0.3));
  const auto m = ss::kmeans(data, 1, 2);
  ASSERT_EQ(m.k(), 1u);
  for (std::size_t b = 0; b < ss::kDescriptorBins; ++b) {
    EXPECT_NEAR(m.centroids[0].histogram[b], data[0].histogram[b], 1e-15);
  }
}

TEST(KMeans, TwoGroupsMatchExhaustiveOptimum) {
  ss::Rng rng(6);
  std::vector<ss::ShapeDescriptor> data;
  for (int i = 0; i < 6; ++i) data.push_back(spike(3, rng.uniform(0, 0.2)));
  for (int i = 0; i < 4; ++i) data.push_back(spike(40, rng.uniform(0, 0.2)));
  // Best of all 2^10 labelings.
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_label;
  for (int mask = 0; mask < (1 << 10); ++mask) {
    std::vector<int> label(10);
    for (int i = 0; i < 10; ++i) label[i] = (mask >> i) & 1;
    const double v = sse(data, label, 2);
    if (v < best) best = v, best_label = label;
  }
  const auto res = ss::kmeans_detailed(data, 2, 1);
  std::vector<int> got(res.assignment.begin(), res.assignment.end());
  EXPECT_NEAR(sse(data, got, 2), best, 1e-12);
  // Same partition up to label swap.
  const bool same = got == best_label;
  std::vector<int> flipped(best_label);
  for (auto& v : flipped) v = 1 - v;
  EXPECT_TRUE(same || got == flipped);
}

TEST(KMeans, ObjectiveNeverIncreases) {
  ss::Rng rng(8);
  std::vector<ss::ShapeDescriptor> data;
  for (int i = 0; i < 60; ++i) {
    ss::ShapeDescriptor d;
    for (auto& v : d.histogram) v = rng.uniform01();
    data.push_back(d);
  }
  const auto res = ss::kmeans_detailed(data, 5, 3);
  for (std::size_t i = 1; i < res.objective_history.size(); ++i) {
    EXPECT_LE(res.objective_history[i], res.objective_history[i - 1] + 1e-12);
  }
}

TEST(KMeans, Preconditions) {
  const std::vector<ss::ShapeDescriptor> data(3, spike(1));
  EXPECT_THROW(ss::kmeans(data, 0, 1), ss::InvalidArgument);
  EXPECT_THROW(ss::kmeans(data, 4, 1), ss::InvalidArgument);
}

TEST(Entropy, SingleClusterIsZero) {
  const std::vector<ss::ShapeDescriptor> data(4, spike(2));
  EXPECT_EQ(ss::entropy_of_assignments(ss::kmeans(data, 1, 0), data), 0.0);
}

TEST(Entropy, UniformOverFourClusters) {
  std::vector<ss::ShapeDescriptor> data;
  for (std::size_t c = 0; c < 4; ++c) {
    for (int r = 0; r < 5; ++r) data.push_back(spike(10 * c));
  }
  const ss::ClusterModel m{{spike(0), spike(10), spike(20), spike(30)}};
  EXPECT_NEAR(ss::entropy_of_assignments(m, data), std::log(4.0), 1e-12);
}

TEST(Entropy, TwoOneOne) {
  const ss::ClusterModel m{{spike(0), spike(10), spike(20)}};
  const std::vector<ss::ShapeDescriptor> data{spike(0), spike(0), spike(10), spike(20)};
  const double expected = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
  EXPECT_NEAR(ss::entropy_of_assignments(m, data), expected, 1e-12);
  EXPECT_NEAR(expected, 1.0397, 1e-4);
}

TEST(Entropy, BoundedByLogK) {
  ss::Rng rng(12);
  std::vector<ss::ShapeDescriptor> data;
  for (int i = 0; i < 40; ++i) data.push_back(spike(rng.uniform_index(ss::kDescriptorBins), rng.uniform(0, 0.5)));
  for (std::size_t k : {1u, 2u, 5u, 8u}) {
    const double h = ss::entropy_of_assignments(ss::kmeans(data, k, 1), data);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Out-of-domain split

namespace {
Eigen::VectorXd v1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}
}  // namespace

TEST(DomainSplit, OneDimensionalExamples) {
  const std::vector<Eigen::VectorXd> ref{v1(0), v1(2)};
  const std::vector<Eigen::VectorXd> query{v1(3.1), v1(1), v1(2), v1(0), v1(-0.5)};
  const auto s = ss::out_of_domain_split(query, ref);
  EXPECT_DOUBLE_EQ(s.max_reference_distance, 1.0);
  EXPECT_EQ(s.out_of_domain, (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(s.in_domain, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(DomainSplit, ReferenceIsInDomainOfItself) {
  ss::Rng rng(4);
  std::vector<Eigen::VectorXd> ref;
  for (int i = 0; i < 30; ++i) ref.push_back(Eigen::VectorXd::NullaryExpr(8, [&]() { return rng.uniform01(); }));
  EXPECT_TRUE(ss::out_of_domain_split(ref, ref).out_of_domain.empty());
}

TEST(DomainSplit, EmptyReferenceIsAnError) {
  const std::vector<Eigen::VectorXd> none;
  EXPECT_THROW(ss::out_of_domain_split(none, none), ss::InvalidArgument);
}
