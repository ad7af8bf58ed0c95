#pragma once

#include "scenesynth/common.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace scenesynth {

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  static Aabb from_min_max(const Vec3& lo, const Vec3& hi) { return Aabb{lo, hi}; }

  bool empty() const { return (min.array() > max.array()).any(); }
  Vec3 size() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return empty() ? 0.0 : size().norm(); }

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& o) {
    min = min.cwiseMin(o.min);
    max = max.cwiseMax(o.max);
  }

  Aabb inflated(double eps) const {
    return Aabb{min - Vec3::Constant(eps), max + Vec3::Constant(eps)};
  }

  bool contains(const Aabb& o) const {
    return (o.min.array() >= min.array()).all() && (o.max.array() <= max.array()).all();
  }

  /// Open-interval overlap: boxes that merely touch do not intersect. Two
  /// intervals are treated as touching when they overlap by no more than eps.
  bool intersects_interior(const Aabb& o, double eps = 1e-9) const {
    for (int a = 0; a < 3; ++a) {
      if (!(min[a] < o.max[a] - eps && o.min[a] < max[a] - eps)) return false;
    }
    return true;
  }

  /// Euclidean distance between two boxes (0 when touching or overlapping).
  double distance_to(const Aabb& o) const {
    Vec3 gap;
    for (int a = 0; a < 3; ++a) {
      gap[a] = std::max({0.0, o.min[a] - max[a], min[a] - o.max[a]});
    }
    return gap.norm();
  }

  Aabb transformed(const RigidTransform& t) const {
    Aabb out;
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1) ? max.x() : min.x(), (c & 2) ? max.y() : min.y(),
                        (c & 4) ? max.z() : min.z());
      out.extend(t.apply(corner));
    }
    return out;
  }

  bool operator==(const Aabb& o) const { return min == o.min && max == o.max; }
};

/// Indexed triangle geometry, meters. Vertex colors are optional; when
/// present there is one RGB triple in [0,1] per vertex.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> vertex_colors;

  bool empty() const { return triangles.empty(); }
  bool has_colors() const { return !vertex_colors.empty(); }

  Aabb bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.extend(v);
    return box;
  }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    return 0.5 * (vertices[tri[1]] - vertices[tri[0]])
                     .cross(vertices[tri[2]] - vertices[tri[0]])
                     .norm();
  }

  void transform(const RigidTransform& t) {
    for (auto& v : vertices) v = t.apply(v);
  }

  /// Appends `other`, offsetting its indices. Returns the index of the first
  /// appended triangle.
  std::size_t append(const TriangleMesh& other) {
    const auto base = static_cast<std::uint32_t>(vertices.size());
    const std::size_t first = triangles.size();
    if (has_colors() != other.has_colors() && !vertices.empty()) {
      // Mixed colored/uncolored content: pad the side that lacks colors.
      if (!has_colors()) vertex_colors.assign(vertices.size(), Vec3::Constant(0.7));
    }
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    if (other.has_colors()) {
      vertex_colors.insert(vertex_colors.end(), other.vertex_colors.begin(),
                           other.vertex_colors.end());
    } else if (has_colors()) {
      vertex_colors.resize(vertices.size(), Vec3::Constant(0.7));
    }
    for (const auto& tri : other.triangles) {
      triangles.push_back({tri[0] + base, tri[1] + base, tri[2] + base});
    }
    return first;
  }

  /// Checks structural invariants; throws FormatError on violation.
  void validate() const {
    for (const auto& v : vertices) {
      if (!v.allFinite()) throw FormatError("mesh has a non-finite vertex coordinate");
    }
    for (const auto& tri : triangles) {
      for (auto i : tri) {
        if (i >= vertices.size()) throw FormatError("triangle index out of range");
      }
    }
    if (has_colors() && vertex_colors.size() != vertices.size()) {
      throw FormatError("vertex color count does not match vertex count");
    }
  }

  /// Removes zero-area triangles. Returns the number removed.
  std::size_t drop_degenerate(double min_area = 1e-14) {
    std::vector<std::array<std::uint32_t, 3>> kept;
    kept.reserve(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      if (triangle_area(t) > min_area) kept.push_back(triangles[t]);
    }
    const std::size_t removed = triangles.size() - kept.size();
    triangles = std::move(kept);
    return removed;
  }
};

// ---------------------------------------------------------------------------
// OBJ subset: `v x y z [r g b]` and `f a b c ...` (polygons are fanned).
// Face tokens may carry `/vt/vn` suffixes, which are ignored.

inline TriangleMesh parse_obj(std::istream& in, const std::string& name = "<obj>") {
  TriangleMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  bool any_color = false;
  bool any_plain = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      std::array<double, 6> vals{};
      int n = 0;
      double x;
      while (n < 6 && ls >> x) vals[n++] = x;
      if (n != 3 && n != 6) {
        throw FormatError(fmt::format("{}:{}: vertex needs 3 or 6 values", name, line_no));
      }
      mesh.vertices.emplace_back(vals[0], vals[1], vals[2]);
      if (n == 6) {
        any_color = true;
        mesh.vertex_colors.emplace_back(vals[3], vals[4], vals[5]);
      } else {
        any_plain = true;
        mesh.vertex_colors.emplace_back(0.7, 0.7, 0.7);
      }
    } else if (tag == "f") {
      std::vector<std::int64_t> idx;
      std::string tok;
      while (ls >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        std::int64_t i = 0;
        try {
          i = std::stoll(head);
        } catch (const std::exception&) {
          throw FormatError(fmt::format("{}:{}: bad face index '{}'", name, line_no, tok));
        }
        // Negative indices are relative to the current end.
        if (i < 0) i = static_cast<std::int64_t>(mesh.vertices.size()) + i + 1;
        if (i < 1) throw FormatError(fmt::format("{}:{}: face index out of range", name, line_no));
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) {
        throw FormatError(fmt::format("{}:{}: face needs at least 3 vertices", name, line_no));
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.triangles.push_back({static_cast<std::uint32_t>(idx[0]),
                                  static_cast<std::uint32_t>(idx[k]),
                                  static_cast<std::uint32_t>(idx[k + 1])});
      }
    }
    // Other statements (vt, vn, o, g, usemtl, ...) are ignored.
  }
  if (!any_color) mesh.vertex_colors.clear();
  (void)any_plain;
  mesh.validate();
  return mesh;
}

inline TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("cannot open mesh file '{}'", path.string()));
  return parse_obj(in, path.string());
}

inline void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
    if (mesh.has_colors()) {
      const auto& c = mesh.vertex_colors[i];
      out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
    }
    out << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

inline void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw FormatError(fmt::format("cannot write mesh file '{}'", path.string()));
  write_obj(out, mesh);
}

// ---------------------------------------------------------------------------
// Primitive builders. All produce outward-facing, closed meshes.

namespace primitives {

inline TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh m;
  for (int c = 0; c < 8; ++c) {
    m.vertices.emplace_back((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(),
                            (c & 4) ? hi.z() : lo.z());
  }
  // Two triangles per face, counter-clockwise seen from outside.
  const std::uint32_t f[12][3] = {{0, 2, 3}, {0, 3, 1},   // z-
                                  {4, 5, 7}, {4, 7, 6},   // z+
                                  {0, 1, 5}, {0, 5, 4},   // y-
                                  {2, 6, 7}, {2, 7, 3},   // y+
                                  {0, 4, 6}, {0, 6, 2},   // x-
                                  {1, 3, 7}, {1, 7, 5}};  // x+
  for (const auto& t : f) m.triangles.push_back({t[0], t[1], t[2]});
  return m;
}

inline TriangleMesh unit_cube() { return box(Vec3::Zero(), Vec3::Ones()); }

/// Closed cylinder along z from z0 to z1, optionally tapered (cone when
/// top_radius == 0).
inline TriangleMesh cylinder(const Vec2& center, double bottom_radius, double top_radius,
                             double z0, double z1, int segments = 24) {
  TriangleMesh m;
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    m.vertices.emplace_back(center.x() + bottom_radius * std::cos(a),
                            center.y() + bottom_radius * std::sin(a), z0);
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    m.vertices.emplace_back(center.x() + top_radius * std::cos(a),
                            center.y() + top_radius * std::sin(a), z1);
  }
  const std::uint32_t cb = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.emplace_back(center.x(), center.y(), z0);
  m.vertices.emplace_back(center.x(), center.y(), z1);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    m.triangles.push_back({i, j, n + j});
    if (top_radius > 0) m.triangles.push_back({i, n + j, n + i});
    m.triangles.push_back({cb, j, i});
    if (top_radius > 0) m.triangles.push_back({cb + 1, n + i, n + j});
  }
  return m;
}

inline TriangleMesh uv_sphere(const Vec3& center, double radius, int rings = 12,
                              int segments = 24) {
  TriangleMesh m;
  m.vertices.emplace_back(center + Vec3(0, 0, -radius));
  for (int r = 1; r < rings; ++r) {
    const double phi = M_PI * r / rings - M_PI / 2;
    for (int s = 0; s < segments; ++s) {
      const double th = 2.0 * M_PI * s / segments;
      m.vertices.emplace_back(center + radius * Vec3(std::cos(phi) * std::cos(th),
                                                     std::cos(phi) * std::sin(th),
                                                     std::sin(phi)));
    }
  }
  m.vertices.emplace_back(center + Vec3(0, 0, radius));
  const auto seg = static_cast<std::uint32_t>(segments);
  const auto ring_start = [&](int r) { return 1 + static_cast<std::uint32_t>(r - 1) * seg; };
  const auto top = static_cast<std::uint32_t>(m.vertices.size() - 1);
  for (std::uint32_t s = 0; s < seg; ++s) {
    const std::uint32_t t = (s + 1) % seg;
    m.triangles.push_back({0, ring_start(1) + t, ring_start(1) + s});
    for (int r = 1; r + 1 < rings; ++r) {
      const std::uint32_t a = ring_start(r) + s, b = ring_start(r) + t;
      const std::uint32_t c = ring_start(r + 1) + s, d = ring_start(r + 1) + t;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
    m.triangles.push_back({top, ring_start(rings - 1) + s, ring_start(rings - 1) + t});
  }
  return m;
}

/// Axis-aligned quad as two triangles.
inline TriangleMesh quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  TriangleMesh m;
  m.vertices = {a, b, c, d};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

inline TriangleMesh merge(std::initializer_list<TriangleMesh> parts) {
  TriangleMesh out;
  for (const auto& p : parts) out.append(p);
  return out;
}

inline void paint(TriangleMesh& mesh, const Vec3& rgb) {
  mesh.vertex_colors.assign(mesh.vertices.size(), rgb);
}

}  // namespace primitives

}  // namespace scenesynth
