#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace scenesynth {

struct Ray {
  Vec3 origin;
  Vec3 direction;  // need not be unit length
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t triangle = std::numeric_limits<std::uint32_t>::max();
  double u = 0, v = 0;  // barycentric weights of vertices 1 and 2

  bool valid() const { return triangle != std::numeric_limits<std::uint32_t>::max(); }

  /// Strict ordering used for the closest hit: smaller t, then lower index.
  bool better_than(const Hit& o) const {
    return t < o.t || (t == o.t && triangle < o.triangle);
  }
};

inline constexpr double kRayEpsilon = 1e-9;

/// Moller-Trumbore, two-sided. Returns t in ray-parameter units, or nullopt.
inline std::optional<Hit> intersect_triangle(const Ray& ray, const Vec3& a, const Vec3& b,
                                             const Vec3& c, std::uint32_t index) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > kRayEpsilon)) return std::nullopt;
  return Hit{t, index, u, v};
}

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Binary BVH over a triangle mesh (median split on the widest centroid axis).
class Bvh {
 public:
  Bvh() = default;

  explicit Bvh(const TriangleMesh& mesh, std::size_t leaf_size = 4) : mesh_(&mesh) {
    const std::size_t n = mesh.triangles.size();
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    centroids_.resize(n);
    boxes_.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& tri = mesh.triangles[t];
      Aabb b;
      for (auto i : tri) b.extend(mesh.vertices[i]);
      boxes_[t] = b;
      centroids_[t] = b.center();
    }
    if (n > 0) build(0, n, leaf_size);
  }

  bool empty() const { return nodes_.empty(); }

  /// Closest hit with t in (kRayEpsilon, t_max]; ties on t go to the lowest
  /// triangle index.
  Hit intersect(const Ray& ray, double t_max = std::numeric_limits<double>::infinity()) const {
    Hit best;
    best.t = t_max;
    bool found = false;
    if (nodes_.empty()) return Hit{};
    const Vec3 inv = ray.direction.cwiseInverse();
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (!slab(node.box, ray.origin, inv, best.t)) continue;
      if (node.count > 0) {
        for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
          const std::uint32_t t = order_[k];
          const auto& tri = mesh_->triangles[t];
          auto h = intersect_triangle(ray, mesh_->vertices[tri[0]], mesh_->vertices[tri[1]],
                                      mesh_->vertices[tri[2]], t);
          if (h && h->t <= best.t && (!found || h->better_than(best))) {
            best = *h;
            found = true;
          }
        }
      } else {
        stack[sp++] = node.right;
        stack[sp++] = node.left;
      }
    }
    return found ? best : Hit{};
  }

  /// Squared distance from p to the nearest triangle, and that triangle.
  std::pair<double, std::uint32_t> nearest(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_t = std::numeric_limits<std::uint32_t>::max();
    visit_within(p, [&](double d2, std::uint32_t t) {
      if (d2 < best || (d2 == best && t < best_t)) {
        best = d2;
        best_t = t;
      }
    }, [&]() { return best; });
    return {best, best_t};
  }

  /// Calls f(dist2, triangle) for every triangle whose squared distance to p
  /// is <= bound() at the time it is reached (bound may shrink).
  template <typename F, typename Bound>
  void visit_within(const Vec3& p, F&& f, Bound&& bound) const {
    if (nodes_.empty()) return;
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (box_dist2(node.box, p) > bound()) continue;
      if (node.count > 0) {
        for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
          const std::uint32_t t = order_[k];
          const auto& tri = mesh_->triangles[t];
          const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[tri[0]], mesh_->vertices[tri[1]],
                                                   mesh_->vertices[tri[2]]);
          const double d2 = (q - p).squaredNorm();
          if (d2 <= bound()) f(d2, t);
        }
      } else {
        // Visit the nearer child first.
        const double dl = box_dist2(nodes_[node.left].box, p);
        const double dr = box_dist2(nodes_[node.right].box, p);
        if (dl <= dr) {
          stack[sp++] = node.right;
          stack[sp++] = node.left;
        } else {
          stack[sp++] = node.left;
          stack[sp++] = node.right;
        }
      }
    }
  }

 private:
  struct Node {
    Aabb box;
    std::uint32_t left = 0, right = 0;
    std::uint32_t first = 0, count = 0;  // count > 0 marks a leaf
  };

  std::uint32_t build(std::size_t begin, std::size_t end, std::size_t leaf_size) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box, cbox;
    for (std::size_t k = begin; k < end; ++k) {
      box.extend(boxes_[order_[k]]);
      cbox.extend(centroids_[order_[k]]);
    }
    nodes_[index].box = box;
    const Vec3 extent = cbox.size();
    int axis = 0;
    if (extent.y() > extent[axis]) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    if (end - begin <= leaf_size || !(extent[axis] > 0)) {
      nodes_[index].first = static_cast<std::uint32_t>(begin);
      nodes_[index].count = static_cast<std::uint32_t>(end - begin);
      return index;
    }
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = centroids_[a][axis], cb = centroids_[b][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const std::uint32_t l = build(begin, mid, leaf_size);
    const std::uint32_t r = build(mid, end, leaf_size);
    nodes_[index].left = l;
    nodes_[index].right = r;
    return index;
  }

  static bool slab(const Aabb& b, const Vec3& o, const Vec3& inv, double t_max) {
    double t0 = 0.0, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      double n = (b.min[a] - o[a]) * inv[a];
      double f = (b.max[a] - o[a]) * inv[a];
      if (std::isnan(n) || std::isnan(f)) {
        // Ray parallel to the slab and origin on its boundary.
        if (o[a] < b.min[a] || o[a] > b.max[a]) return false;
        continue;
      }
      if (n > f) std::swap(n, f);
      // Inflate slightly so hits on box faces are never culled by round-off.
      n -= 1e-9 * (1.0 + std::abs(n));
      f += 1e-9 * (1.0 + std::abs(f));
      t0 = std::max(t0, n);
      t1 = std::min(t1, f);
      if (t0 > t1) return false;
    }
    return true;
  }

  static double box_dist2(const Aabb& b, const Vec3& p) {
    double d = 0;
    for (int a = 0; a < 3; ++a) {
      const double g = std::max({0.0, b.min[a] - p[a], p[a] - b.max[a]});
      d += g * g;
    }
    return d;
  }

  const TriangleMesh* mesh_ = nullptr;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> centroids_;
  std::vector<Aabb> boxes_;
  std::vector<Node> nodes_;
};

}  // namespace scenesynth
