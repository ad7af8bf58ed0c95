#pragma once

// Room-plus-box scenes whose surfaces are known in closed form, and small
// brute-force references for ray casting and nearest-surface queries.

#include "scenesynth/scene_builder.hpp"
#include "scenesynth/virtual_scanner.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace analytic {

namespace ss = scenesynth;
using ss::Vec3;

/// Axis-aligned rectangle: coordinate `axis` fixed at `at`, the other two
/// bounded by lo/hi.
struct Rect {
  int axis;
  double at;
  Vec3 lo, hi;

  double distance(const Vec3& p) const {
    double s = 0;
    for (int a = 0; a < 3; ++a) {
      double g;
      if (a == axis) {
        g = p[a] - at;
      } else {
        g = std::max({0.0, lo[a] - p[a], p[a] - hi[a]});
      }
      s += g * g;
    }
    return std::sqrt(s);
  }
};

inline std::vector<Rect> box_faces(const Vec3& lo, const Vec3& hi) {
  std::vector<Rect> out;
  for (int a = 0; a < 3; ++a) {
    out.push_back({a, lo[a], lo, hi});
    out.push_back({a, hi[a], lo, hi});
  }
  return out;
}

/// Floor and four walls of a room (no ceiling).
inline std::vector<Rect> room_faces(const ss::RoomSpec& r) {
  const Vec3 lo(0, 0, 0), hi(r.width, r.depth, r.height);
  std::vector<Rect> out;
  out.push_back({2, 0.0, lo, hi});
  out.push_back({0, 0.0, lo, hi});
  out.push_back({0, r.width, lo, hi});
  out.push_back({1, 0.0, lo, hi});
  out.push_back({1, r.depth, lo, hi});
  return out;
}

struct Scene {
  ss::RoomSpec room;
  std::vector<std::pair<Vec3, Vec3>> boxes;  // instance k + 1
  ss::SceneMesh mesh;

  double surface_distance(const Vec3& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& f : room_faces(room)) d = std::min(d, f.distance(p));
    for (const auto& [lo, hi] : boxes) {
      for (const auto& f : box_faces(lo, hi)) d = std::min(d, f.distance(p));
    }
    return d;
  }
};

/// Builds the labeled mesh for a room with axis-aligned boxes.
inline Scene make_scene(const ss::RoomSpec& room, std::vector<std::pair<Vec3, Vec3>> boxes) {
  Scene s{room, std::move(boxes), {}};
  s.mesh.mesh = ss::room_shell(room, false);
  s.mesh.triangle_instance.assign(s.mesh.mesh.triangles.size(), 0);
  std::uint32_t id = 1;
  for (const auto& [lo, hi] : s.boxes) {
    auto b = ss::primitives::box(lo, hi);
    ss::primitives::paint(b, ss::instance_color(id));
    s.mesh.mesh.append(b);
    s.mesh.triangle_instance.resize(s.mesh.mesh.triangles.size(), id++);
  }
  return s;
}

/// Ray/triangle intersection via the supporting plane and edge-sign tests.
inline std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                                          const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-18) return std::nullopt;
  const double t = n.dot(a - o) / denom;
  if (!(t > 1e-9)) return std::nullopt;
  const Vec3 p = o + t * d;
  const double nn = n.squaredNorm();
  const double e = -1e-12 * nn;
  if (n.dot((b - a).cross(p - a)) < e) return std::nullopt;
  if (n.dot((c - b).cross(p - b)) < e) return std::nullopt;
  if (n.dot((a - c).cross(p - c)) < e) return std::nullopt;
  return t;
}

struct Pixel {
  double depth = 0;
  std::uint32_t instance = 0;
  double runner_up = std::numeric_limits<double>::infinity();  // next distinct-instance hit
};

/// Unaccelerated render: every triangle is tested for every pixel.
inline std::vector<Pixel> brute_render(const ss::SceneMesh& scene, const ss::CameraPose& pose,
                                       const ss::CameraIntrinsics& k, double max_range) {
  std::vector<Pixel> out(static_cast<std::size_t>(k.width) * k.height);
  const auto R = pose.rotation();
  const auto& m = scene.mesh;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dc((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 dir = R * dc;
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t id = 0;
      std::vector<std::pair<double, std::uint32_t>> hits;
      for (std::size_t t = 0; t < m.triangles.size(); ++t) {
        const auto& tri = m.triangles[t];
        auto h = ray_triangle(pose.position, dir, m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]);
        if (h) hits.push_back({*h, scene.triangle_instance[t]});
        if (h && *h < best) {
          best = *h;
          id = scene.triangle_instance[t];
        }
      }
      auto& px = out[static_cast<std::size_t>(v) * k.width + u];
      if (best * dc.norm() <= max_range) {
        px.depth = best;
        px.instance = id;
        for (const auto& [t, i] : hits) {
          if (i != id) px.runner_up = std::min(px.runner_up, t);
        }
      }
    }
  }
  return out;
}

}  // namespace analytic
