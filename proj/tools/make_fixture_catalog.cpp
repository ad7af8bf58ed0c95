// Writes the small procedural asset base used by the tests and examples:
// 15 floor, 10 wall and 25 surface objects as OBJ meshes plus manifest.json.
//
//   make_fixture_catalog <output dir>

#include "scenesynth/scenesynth.hpp"

#include <iostream>

namespace ss = scenesynth;
using ss::TriangleMesh;
using ss::Vec2;
using ss::Vec3;
namespace prim = ss::primitives;

namespace {

// Canonical builders: +y is the front, base at z = 0, roughly unit scale.

TriangleMesh table(ss::Rng& r) {
  const double t = r.uniform(0.04, 0.08), leg = r.uniform(0.05, 0.09);
  TriangleMesh m = prim::box({-0.6, -0.35, 0.75 - t}, {0.6, 0.35, 0.75});
  for (double x : {-0.6, 0.6 - leg}) {
    for (double y : {-0.35, 0.35 - leg}) m.append(prim::box({x, y, 0}, {x + leg, y + leg, 0.75 - t}));
  }
  return m;
}

TriangleMesh chair(ss::Rng& r) {
  const double seat = r.uniform(0.42, 0.48);
  TriangleMesh m = prim::box({-0.25, -0.25, seat - 0.05}, {0.25, 0.25, seat});
  m.append(prim::box({-0.25, -0.25, seat}, {0.25, -0.2, 0.9}));  // back sits behind
  for (double x : {-0.25, 0.2}) {
    for (double y : {-0.25, 0.2}) m.append(prim::box({x, y, 0}, {x + 0.05, y + 0.05, seat - 0.05}));
  }
  return m;
}

TriangleMesh cabinet(ss::Rng& r) {
  TriangleMesh m = prim::box({-0.4, -0.25, 0}, {0.4, 0.25, 1.0});
  const int drawers = 2 + static_cast<int>(r.uniform_index(3));
  for (int d = 0; d < drawers; ++d) {
    const double z = 0.1 + 0.85 * d / drawers;
    m.append(prim::box({-0.05, 0.25, z}, {0.05, 0.28, z + 0.03}));  // handle
  }
  return m;
}

TriangleMesh sofa(ss::Rng& r) {
  const double arm = r.uniform(0.12, 0.2);
  TriangleMesh m = prim::box({-0.9, -0.4, 0}, {0.9, 0.4, 0.42});
  m.append(prim::box({-0.9, -0.4, 0.42}, {0.9, -0.2, 0.8}));
  m.append(prim::box({-0.9, -0.2, 0.42}, {-0.9 + arm, 0.4, 0.6}));
  m.append(prim::box({0.9 - arm, -0.2, 0.42}, {0.9, 0.4, 0.6}));
  return m;
}

TriangleMesh lamp(ss::Rng& r) {
  const double shade = r.uniform(0.15, 0.22);
  TriangleMesh m = prim::cylinder({0, 0}, 0.15, 0.15, 0, 0.03, 16);
  m.append(prim::cylinder({0, 0}, 0.02, 0.02, 0.03, 1.2, 8));
  m.append(prim::cylinder({0, 0}, shade, 0.08, 1.15, 1.5, 16));
  return m;
}

// Wall objects: thin along y, front +y (away from the wall).
TriangleMesh painting(ss::Rng& r) {
  const double f = r.uniform(0.03, 0.06);
  TriangleMesh m = prim::box({-0.4, -0.02, 0}, {0.4, 0.0, 0.6});
  m.append(prim::box({-0.4, 0.0, 0}, {0.4, 0.02, f}));
  m.append(prim::box({-0.4, 0.0, 0.6 - f}, {0.4, 0.02, 0.6}));
  return m;
}

TriangleMesh shelf(ss::Rng& r) {
  const double lip = r.uniform(0.02, 0.05);
  TriangleMesh m = prim::box({-0.4, -0.125, 0.27}, {0.4, 0.125, 0.3});
  m.append(prim::box({-0.4, -0.125, 0}, {-0.37, 0.125, 0.27}));
  m.append(prim::box({0.37, -0.125, 0}, {0.4, 0.125, 0.27}));
  m.append(prim::box({-0.4, 0.1, 0.3}, {0.4, 0.125, 0.3 + lip}));
  return m;
}

TriangleMesh clock(ss::Rng& r) {
  // Disc in the x-z plane: build along z, then swap y and z.
  TriangleMesh m = prim::cylinder({0, 0}, 0.175, 0.175, 0, r.uniform(0.04, 0.06), 24);
  for (auto& v : m.vertices) v = Vec3(v.x(), v.z(), v.y() + 0.175);
  for (auto& t : m.triangles) std::swap(t[1], t[2]);
  return m;
}

TriangleMesh mirror(ss::Rng& r) {
  const double w = r.uniform(0.2, 0.3);
  TriangleMesh m = prim::box({-w, -0.02, 0}, {w, 0.02, 0.9});
  m.append(prim::box({-0.05, 0.02, 0.8}, {0.05, 0.04, 0.9}));
  return m;
}

TriangleMesh tv(ss::Rng& r) {
  TriangleMesh m = prim::box({-0.5, -0.03, 0}, {0.5, 0.03, 0.6});
  m.append(prim::box({-0.2, -0.04, 0.15}, {0.2, -0.03, 0.45 + r.uniform(0, 0.05)}));
  return m;
}

// Surface objects.
TriangleMesh mug(ss::Rng& r) {
  TriangleMesh m = prim::cylinder({0, 0}, 0.04, r.uniform(0.04, 0.05), 0, 0.1, 16);
  m.append(prim::box({0.04, -0.01, 0.02}, {0.06, 0.01, 0.08}));
  return m;
}

TriangleMesh book(ss::Rng& r) {
  const double t = r.uniform(0.02, 0.05);
  return prim::merge({prim::box({-0.1, -0.075, 0}, {0.1, 0.075, t}),
                      prim::box({-0.1, -0.075, t}, {-0.09, 0.075, t + 0.005})});
}

TriangleMesh vase(ss::Rng& r) {
  const double belly = r.uniform(0.05, 0.07);
  TriangleMesh m = prim::cylinder({0, 0}, 0.04, belly, 0, 0.15, 16);
  m.append(prim::cylinder({0, 0}, belly, 0.025, 0.15, 0.3, 16));
  return m;
}

TriangleMesh bowl(ss::Rng& r) {
  return prim::cylinder({0, 0}, r.uniform(0.04, 0.06), 0.09, 0, 0.08, 20);
}

TriangleMesh plant(ss::Rng& r) {
  TriangleMesh m = prim::cylinder({0, 0}, 0.07, 0.09, 0, 0.14, 16);
  m.append(prim::uv_sphere({0, 0, 0.24}, r.uniform(0.09, 0.1), 8, 16));
  return m;
}

struct ClassDef {
  const char* name;
  ss::Group group;
  Vec3 dims;
  TriangleMesh (*build)(ss::Rng&);
  Vec3 color;
  int variants;
};

const ClassDef kClasses[] = {
    {"table", ss::Group::floor, {1.2, 0.7, 0.75}, table, {0.55, 0.38, 0.22}, 3},
    {"chair", ss::Group::floor, {0.5, 0.5, 0.9}, chair, {0.35, 0.25, 0.15}, 3},
    {"cabinet", ss::Group::floor, {0.8, 0.5, 1.0}, cabinet, {0.8, 0.8, 0.75}, 3},
    {"sofa", ss::Group::floor, {1.8, 0.8, 0.8}, sofa, {0.3, 0.4, 0.6}, 3},
    {"lamp", ss::Group::floor, {0.4, 0.4, 1.5}, lamp, {0.9, 0.85, 0.6}, 3},
    {"painting", ss::Group::wall, {0.8, 0.04, 0.6}, painting, {0.7, 0.2, 0.2}, 2},
    {"shelf", ss::Group::wall, {0.8, 0.25, 0.3}, shelf, {0.6, 0.45, 0.3}, 2},
    {"clock", ss::Group::wall, {0.35, 0.06, 0.35}, clock, {0.95, 0.95, 0.95}, 2},
    {"mirror", ss::Group::wall, {0.5, 0.04, 0.9}, mirror, {0.75, 0.85, 0.9}, 2},
    {"tv", ss::Group::wall, {1.0, 0.08, 0.6}, tv, {0.1, 0.1, 0.12}, 2},
    {"mug", ss::Group::obj, {0.12, 0.08, 0.1}, mug, {0.9, 0.9, 0.85}, 5},
    {"book", ss::Group::obj, {0.2, 0.15, 0.04}, book, {0.2, 0.5, 0.3}, 5},
    {"vase", ss::Group::obj, {0.12, 0.12, 0.3}, vase, {0.3, 0.6, 0.7}, 5},
    {"bowl", ss::Group::obj, {0.18, 0.18, 0.08}, bowl, {0.85, 0.7, 0.5}, 5},
    {"plant", ss::Group::obj, {0.2, 0.2, 0.35}, plant, {0.2, 0.6, 0.2}, 5},
};

constexpr ss::FrontAxis kAxes[] = {ss::FrontAxis::pos_y, ss::FrontAxis::neg_x, ss::FrontAxis::neg_y,
                                   ss::FrontAxis::pos_x};

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture_catalog <output dir>\n";
    return 1;
  }
  const std::filesystem::path out(argv[1]);
  std::filesystem::create_directories(out / "meshes");
  nlohmann::json manifest = nlohmann::json::array();
  std::size_t n = 0;
  for (const auto& c : kClasses) {
    for (int v = 0; v < c.variants; ++v, ++n) {
      ss::Rng rng(ss::hash64(2024, n));
      TriangleMesh m = c.build(rng);
      prim::paint(m, c.color * rng.uniform(0.8, 1.0));
      // Author each variant in a different orientation and unit so loading
      // has to canonicalize it.
      const ss::FrontAxis axis = kAxes[n % 4];
      const double unit = (n % 3 == 0) ? 100.0 : 1.0;
      const int back = (4 - ss::quarter_turns_to_forward(axis)) % 4;
      m.transform({ss::quarter_turn_rotation(back) * unit, Vec3::Zero()});
      const std::string id = fmt::format("{}_{:02d}", c.name, v);
      const std::string rel = "meshes/" + id + ".obj";
      ss::write_obj(out / rel, m);
      // Slight per-variant size variation.
      const Vec3 dims = c.dims * rng.uniform(0.85, 1.1);
      ss::AssetRecord rec{id, c.name, c.group, rel, dims, axis};
      nlohmann::json j;
      ss::to_json(j, rec);
      manifest.push_back(j);
    }
  }
  std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";
  std::cout << "wrote " << n << " assets to " << out << "\n";
  return 0;
}
