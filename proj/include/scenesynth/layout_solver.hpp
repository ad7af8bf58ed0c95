#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/mesh.hpp"
#include "scenesynth/relations.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace scenesynth {

struct Cell {
  int i = 0;
  int j = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Uniform grid over a planar surface, in surface-local meters.
struct PlacementGrid {
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.1;
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> occupancy;  // row-major, index j * nx + i

  PlacementGrid() = default;
  PlacementGrid(Vec2 origin_, double cell, int nx_, int ny_)
      : origin(std::move(origin_)), cell_size(cell), nx(nx_), ny(ny_),
        occupancy(static_cast<std::size_t>(std::max(0, nx_) * std::max(0, ny_)), 0) {
    if (!(cell > 0)) throw InvalidArgument("grid cell_size must be > 0");
    if (nx_ < 0 || ny_ < 0) throw InvalidArgument("grid dimensions must be >= 0");
  }

  /// Largest grid of whole cells that fits in a width x depth rectangle.
  static PlacementGrid covering(const Vec2& origin, double width, double depth, double cell) {
    return PlacementGrid(origin, cell, cells_in(width, cell), cells_in(depth, cell));
  }

  static int cells_in(double length, double cell) {
    return std::max(0, static_cast<int>(std::floor(length / cell + 1e-9)));
  }

  /// Cells needed to cover `length`.
  static int cells_for(double length, double cell) {
    return std::max(1, static_cast<int>(std::ceil(length / cell - 1e-9)));
  }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  bool occupied(int i, int j) const { return occupancy[index(i, j)] != 0; }
  void set(int i, int j, bool v) { occupancy[index(i, j)] = v ? 1 : 0; }

  Vec2 cell_min(int i, int j) const { return origin + cell_size * Vec2(i, j); }
  Vec2 cell_center(int i, int j) const { return origin + cell_size * Vec2(i + 0.5, j + 0.5); }
  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * ny; }
};

enum class SurfaceKind { floor, wall, support };

inline std::string_view to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::floor: return "floor";
    case SurfaceKind::wall: return "wall";
    case SurfaceKind::support: return "support";
  }
  return "?";
}

/// A placement surface: a grid in a local (u, v) frame embedded in the world.
/// Objects extrude from the surface along `normal`.
struct Surface {
  SurfaceKind kind = SurfaceKind::floor;
  int index = 0;  // wall number (0=S,1=E,2=N,3=W) or 0
  PlacementGrid grid;
  Vec3 frame_origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  /// Orientation is forced on walls (front faces into the room); -1 = free.
  int fixed_quarter_turns = -1;

  Vec3 to_world(const Vec2& local) const {
    return frame_origin + local.x() * axis_u + local.y() * axis_v;
  }

  static Surface floor(const PlacementGrid& grid, double height = 0.0) {
    Surface s;
    s.kind = SurfaceKind::floor;
    s.grid = grid;
    s.frame_origin = Vec3(0, 0, height);
    return s;
  }
};

/// Footprint of an object in cells plus its extrusion off the surface.
struct Footprint {
  int w = 1;
  int h = 1;
  double extrude = 0;
};

inline Footprint footprint_for(const Surface& s, const Vec3& dims, int quarter_turns) {
  const double c = s.grid.cell_size;
  if (s.kind == SurfaceKind::wall) {
    return {PlacementGrid::cells_for(dims.x(), c), PlacementGrid::cells_for(dims.z(), c), dims.y()};
  }
  const bool swap = quarter_turns % 2 != 0;
  const double ex = swap ? dims.y() : dims.x();
  const double ey = swap ? dims.x() : dims.y();
  return {PlacementGrid::cells_for(ex, c), PlacementGrid::cells_for(ey, c), dims.z()};
}

struct Placement {
  std::string object_id;
  SurfaceKind surface_kind = SurfaceKind::floor;
  int surface_index = 0;
  Cell anchor_cell;
  int quarter_turns = 0;  // orientation = 90 * quarter_turns degrees
  RigidTransform world_transform;
  // Derived geometry used by predicates and collision checks.
  Footprint footprint;
  Aabb footprint_rect;  // window rectangle on the surface (zero thickness)
  Aabb box;             // window rectangle extruded along the surface normal
  Vec3 anchor_point = Vec3::Zero();
  Vec3 forward = Vec3::UnitY();

  int orientation_degrees() const { return 90 * quarter_turns; }
};

struct SolverBudget {
  std::size_t max_nodes = 50'000;
  std::size_t max_saved_solutions = 100;

  static SolverBudget unlimited() {
    return {std::numeric_limits<std::size_t>::max(), std::numeric_limits<std::size_t>::max()};
  }
};

struct LayoutSolution {
  std::vector<Placement> placements;
  std::size_t placed_count = 0;
  std::vector<std::string> skipped;
  // Search statistics.
  std::size_t nodes = 0;
  std::size_t saved_solutions = 0;
  bool budget_exhausted = false;

  const Placement* find(const std::string& id) const {
    for (const auto& p : placements) {
      if (p.object_id == id) return &p;
    }
    return nullptr;
  }

  nlohmann::json trace() const {
    return {{"nodes", nodes},
            {"saved_solutions", saved_solutions},
            {"placed_count", placed_count},
            {"skipped", skipped},
            {"budget_exhausted", budget_exhausted}};
  }
};

/// Builds the placement for object dims at (surface, quarter turns, cell).
inline Placement make_placement(const std::string& id, const Surface& s, const Vec3& dims,
                                int quarter_turns, Cell cell) {
  Placement p;
  p.object_id = id;
  p.surface_kind = s.kind;
  p.surface_index = s.index;
  p.anchor_cell = cell;
  p.quarter_turns = s.fixed_quarter_turns >= 0 ? s.fixed_quarter_turns : quarter_turns;
  p.footprint = footprint_for(s, dims, p.quarter_turns);

  const double c = s.grid.cell_size;
  const Vec2 lo = s.grid.cell_min(cell.i, cell.j);
  const Vec2 hi = lo + c * Vec2(p.footprint.w, p.footprint.h);
  p.footprint_rect.extend(s.to_world(lo));
  p.footprint_rect.extend(s.to_world(hi));
  p.box = p.footprint_rect;
  p.box.extend(s.to_world(lo) + p.footprint.extrude * s.normal);
  p.box.extend(s.to_world(hi) + p.footprint.extrude * s.normal);

  const Vec2 mid = 0.5 * (lo + hi);
  p.anchor_point = s.to_world(mid);
  const Mat3 rot = quarter_turn_rotation(p.quarter_turns);
  p.forward = rot * Vec3::UnitY();
  p.world_transform.rotation = rot;
  if (s.kind == SurfaceKind::wall) {
    p.world_transform.translation = s.to_world(Vec2(mid.x(), lo.y())) + 0.5 * dims.y() * s.normal;
  } else {
    p.world_transform.translation = p.anchor_point;
  }
  return p;
}

/// World AABB of the object itself (not its grid window).
inline Aabb object_box(const Placement& p, const Vec3& dims) {
  const Aabb local{Vec3(-0.5 * dims.x(), -0.5 * dims.y(), 0.0),
                   Vec3(0.5 * dims.x(), 0.5 * dims.y(), dims.z())};
  return local.transformed(p.world_transform);
}

// ---------------------------------------------------------------------------
// Search context: surfaces with live occupancy, placed objects, obstacles.

class LayoutContext {
 public:
  LayoutContext(std::vector<Surface> surfaces, std::vector<Aabb> obstacles, Aabb room)
      : surfaces_(std::move(surfaces)), obstacles_(std::move(obstacles)), room_(std::move(room)) {
    integrals_.resize(surfaces_.size());
    for (std::size_t s = 0; s < surfaces_.size(); ++s) rebuild_integral(s);
  }

  const std::vector<Surface>& surfaces() const { return surfaces_; }
  const std::vector<Placement>& placed() const { return placed_; }
  const std::vector<Aabb>& obstacles() const { return obstacles_; }
  const Aabb& room() const { return room_; }

  const Placement* lookup(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &placed_[it->second];
  }

  std::size_t surface_slot(const Placement& p) const {
    for (std::size_t s = 0; s < surfaces_.size(); ++s) {
      if (surfaces_[s].kind == p.surface_kind && surfaces_[s].index == p.surface_index) return s;
    }
    throw InvalidArgument("placement refers to an unknown surface");
  }

  /// Count of occupied cells in [i0, i1) x [j0, j1).
  int occupied_in(std::size_t s, int i0, int j0, int i1, int j1) const {
    const auto& I = integrals_[s];
    const int stride = surfaces_[s].grid.nx + 1;
    return I[j1 * stride + i1] - I[j0 * stride + i1] - I[j1 * stride + i0] + I[j0 * stride + i0];
  }

  void push(Placement p) {
    const std::size_t s = surface_slot(p);
    mark(s, p, true);
    by_id_[p.object_id] = placed_.size();
    placed_.push_back(std::move(p));
  }

  void pop() {
    const Placement& p = placed_.back();
    mark(surface_slot(p), p, false);
    by_id_.erase(p.object_id);
    placed_.pop_back();
  }

 private:
  void mark(std::size_t s, const Placement& p, bool value) {
    auto& g = surfaces_[s].grid;
    for (int j = p.anchor_cell.j; j < p.anchor_cell.j + p.footprint.h; ++j) {
      for (int i = p.anchor_cell.i; i < p.anchor_cell.i + p.footprint.w; ++i) g.set(i, j, value);
    }
    rebuild_integral(s);
  }

  void rebuild_integral(std::size_t s) {
    const auto& g = surfaces_[s].grid;
    const int stride = g.nx + 1;
    auto& I = integrals_[s];
    I.assign(static_cast<std::size_t>(stride) * (g.ny + 1), 0);
    for (int j = 0; j < g.ny; ++j) {
      int row = 0;
      for (int i = 0; i < g.nx; ++i) {
        row += g.occupied(i, j) ? 1 : 0;
        I[(j + 1) * stride + i + 1] = I[j * stride + i + 1] + row;
      }
    }
  }

  std::vector<Surface> surfaces_;
  std::vector<Aabb> obstacles_;
  Aabb room_;
  std::vector<Placement> placed_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::vector<int>> integrals_;
};

inline constexpr double kBesideGap = 0.3;

/// Horizontal component of a vector.
inline Vec3 horizontal(const Vec3& v) { return {v.x(), v.y(), 0.0}; }

/// Evaluates one relation for candidate placement `p`. `ctx` supplies earlier
/// placements (for refs) and surface occupancy (for clearance).
inline bool relation_holds(const SpatialRelation& r, const Placement& p, const LayoutContext& ctx) {
  const Placement* ref = nullptr;
  if (const auto* id = relation_ref(r)) {
    ref = ctx.lookup(*id);
    if (!ref) return false;
  }
  return std::visit(
      [&](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, rel::Facing>) {
          return p.quarter_turns == quarter_turns_for(v.direction);
        } else if constexpr (std::is_same_v<T, rel::FaceToward>) {
          const Vec3 d = horizontal(ref->anchor_point - p.anchor_point);
          const Vec3 side(p.forward.y(), -p.forward.x(), 0.0);
          const double ahead = p.forward.dot(d);
          return ahead > 1e-9 && ahead >= std::abs(side.dot(d)) - 1e-12;
        } else if constexpr (std::is_same_v<T, rel::Near>) {
          return (p.anchor_point - ref->anchor_point).norm() <= v.max_dist + 1e-12;
        } else if constexpr (std::is_same_v<T, rel::Far>) {
          return (p.anchor_point - ref->anchor_point).norm() >= v.min_dist - 1e-12;
        } else if constexpr (std::is_same_v<T, rel::Beside>) {
          return p.footprint_rect.distance_to(ref->footprint_rect) <= kBesideGap + 1e-12;
        } else if constexpr (std::is_same_v<T, rel::Directional>) {
          const Vec3 d = horizontal(p.anchor_point - ref->anchor_point);
          const Vec3 right(ref->forward.y(), -ref->forward.x(), 0.0);
          switch (v.kind) {
            case DirectionalKind::in_front_of: return ref->forward.dot(d) > 1e-9;
            case DirectionalKind::behind: return ref->forward.dot(d) < -1e-9;
            case DirectionalKind::right_of: return right.dot(d) > 1e-9;
            case DirectionalKind::left_of: return right.dot(d) < -1e-9;
          }
          return false;
        } else if constexpr (std::is_same_v<T, rel::AgainstWall>) {
          if (p.surface_kind == SurfaceKind::wall) return true;
          const auto& g = ctx.surfaces()[ctx.surface_slot(p)].grid;
          return p.anchor_cell.i == 0 || p.anchor_cell.j == 0 ||
                 p.anchor_cell.i + p.footprint.w == g.nx || p.anchor_cell.j + p.footprint.h == g.ny;
        } else {
          const std::size_t s = ctx.surface_slot(p);
          const Surface& surf = ctx.surfaces()[s];
          if (surf.kind == SurfaceKind::wall) {
            // Free space in front of a wall object: nothing in the slab out to
            // extrude + min_dist.
            Aabb sweep = p.footprint_rect;
            const double reach = p.footprint.extrude + v.min_dist;
            sweep.extend(p.footprint_rect.min + reach * surf.normal);
            sweep.extend(p.footprint_rect.max + reach * surf.normal);
            if (!ctx.room().inflated(1e-9).contains(sweep)) return false;
            for (const auto& o : ctx.obstacles()) {
              if (sweep.intersects_interior(o)) return false;
            }
            return true;
          }
          const auto& g = surf.grid;
          const int n = PlacementGrid::cells_for(v.min_dist, g.cell_size);
          const int i0 = p.anchor_cell.i, j0 = p.anchor_cell.j;
          const int i1 = i0 + p.footprint.w, j1 = j0 + p.footprint.h;
          int a0, b0, a1, b1;  // strip [a0,a1) x [b0,b1)
          switch (p.quarter_turns) {
            case 0: a0 = i0, a1 = i1, b0 = j1, b1 = j1 + n; break;   // +y
            case 1: a0 = i0 - n, a1 = i0, b0 = j0, b1 = j1; break;   // -x
            case 2: a0 = i0, a1 = i1, b0 = j0 - n, b1 = j0; break;   // -y
            default: a0 = i1, a1 = i1 + n, b0 = j0, b1 = j1; break;  // +x
          }
          if (a0 < 0 || b0 < 0 || a1 > g.nx || b1 > g.ny) return false;
          return ctx.occupied_in(s, a0, b0, a1, b1) == 0;
        }
      },
      r);
}

/// Full feasibility test of a candidate: bounds, free cells, room and
/// obstacle clearance, cross-surface collisions, and every relation.
inline bool candidate_feasible(const Placement& p, std::span<const SpatialRelation> relations,
                               const LayoutContext& ctx) {
  const std::size_t s = ctx.surface_slot(p);
  const auto& g = ctx.surfaces()[s].grid;
  const int i1 = p.anchor_cell.i + p.footprint.w;
  const int j1 = p.anchor_cell.j + p.footprint.h;
  if (p.anchor_cell.i < 0 || p.anchor_cell.j < 0 || i1 > g.nx || j1 > g.ny) return false;
  if (ctx.occupied_in(s, p.anchor_cell.i, p.anchor_cell.j, i1, j1) != 0) return false;
  if (!ctx.room().inflated(1e-9).contains(p.box)) return false;
  for (const auto& o : ctx.obstacles()) {
    if (p.box.intersects_interior(o)) return false;
  }
  for (const auto& q : ctx.placed()) {
    if (q.surface_kind == p.surface_kind && q.surface_index == p.surface_index) continue;
    if (p.box.intersects_interior(q.box)) return false;
  }
  for (const auto& r : relations) {
    if (!relation_holds(r, p, ctx)) return false;
  }
  return true;
}

/// Enumerates the candidate (surface, orientation, cell) space of an object
/// as a flat index range.
class CandidateSpace {
 public:
  struct Candidate {
    std::size_t surface;
    int quarter_turns;
    Cell cell;
  };

  explicit CandidateSpace(const std::vector<Surface>& surfaces) {
    for (std::size_t s = 0; s < surfaces.size(); ++s) {
      const auto& surf = surfaces[s];
      const std::size_t cells = surf.grid.cell_count();
      if (cells == 0) continue;
      const int orientations = surf.fixed_quarter_turns >= 0 ? 1 : 4;
      blocks_.push_back({s, surf.fixed_quarter_turns, surf.grid.nx, cells, size_});
      size_ += static_cast<std::size_t>(orientations) * cells;
    }
  }

  std::size_t size() const { return size_; }

  Candidate at(std::size_t index) const {
    auto it = std::upper_bound(blocks_.begin(), blocks_.end(), index,
                               [](std::size_t v, const Block& b) { return v < b.start; });
    const Block& b = *(it - 1);
    std::size_t local = index - b.start;
    const int q = b.fixed_q >= 0 ? b.fixed_q : static_cast<int>(local / b.cells);
    local %= b.cells;
    return {b.surface, q, Cell{static_cast<int>(local % b.nx), static_cast<int>(local / b.nx)}};
  }

 private:
  struct Block {
    std::size_t surface;
    int fixed_q;
    int nx;
    std::size_t cells;
    std::size_t start;
  };
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

/// Fisher-Yates shuffle drawn lazily: O(1) amortized per element, no O(n)
/// setup, so a node that finds a feasible candidate early stays cheap.
class LazyPermutation {
 public:
  explicit LazyPermutation(std::size_t n) : remaining_(n) {}
  bool empty() const { return remaining_ == 0; }
  std::size_t next(Rng& rng) {
    const std::size_t j = rng.uniform_index(remaining_);
    const std::size_t value = get(j);
    swaps_[j] = get(remaining_ - 1);
    --remaining_;
    return value;
  }

 private:
  std::size_t get(std::size_t k) const {
    auto it = swaps_.find(k);
    return it == swaps_.end() ? k : it->second;
  }
  std::size_t remaining_;
  std::unordered_map<std::size_t, std::size_t> swaps_;
};

/// All cells where `object` can be placed with `quarter_turns` on `grid`
/// given the relations and earlier placements (whose cells are expected to be
/// marked occupied in `grid`).
inline std::vector<Cell> feasible_cells(const ObjectSpec& object, const PlacementGrid& grid,
                                        std::span<const SpatialRelation> relations,
                                        const std::vector<Placement>& placed, int quarter_turns,
                                        const std::vector<Aabb>& obstacles = {}) {
  const Surface surface = Surface::floor(grid);
  Aabb room{Vec3(grid.origin.x(), grid.origin.y(), -1e9),
            Vec3(grid.origin.x() + grid.nx * grid.cell_size, grid.origin.y() + grid.ny * grid.cell_size, 1e9)};
  // Earlier placements are registered for relation lookups only; their cells
  // are already marked in `grid`.
  LayoutContext with_refs({surface}, obstacles, room);
  std::vector<Cell> out;
  for (const auto& p : placed) {
    Placement ghost = p;
    ghost.footprint.w = 0;
    ghost.footprint.h = 0;
    with_refs.push(ghost);
  }
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      Placement cand = make_placement(object.id, surface, object.dims, quarter_turns, {i, j});
      if (candidate_feasible(cand, relations, with_refs)) out.push_back({i, j});
    }
  }
  return out;
}

namespace detail {

class GroupSearch {
 public:
  GroupSearch(const std::vector<ObjectSpec>& objects, const RelationAssignment& relations,
              LayoutContext& ctx, const SolverBudget& budget, std::uint64_t seed)
      : objects_(objects), relations_(relations), ctx_(ctx), budget_(budget), rng_(seed),
        space_(ctx.surfaces()) {}

  LayoutSolution run() {
    cap_ = upper_bound();
    if (!objects_.empty() && cap_ > 0) {
      dfs(0);
    } else {
      save();
    }
    LayoutSolution sol;
    sol.nodes = nodes_;
    sol.saved_solutions = saved_total_;
    sol.budget_exhausted = exhausted_;
    const Saved* best = nullptr;
    for (const auto& s : saved_) {
      if (!best || s.placements.size() > best->placements.size() ||
          (s.placements.size() == best->placements.size() && s.order < best->order)) {
        best = &s;
      }
    }
    if (best) sol.placements = best->placements;
    sol.placed_count = sol.placements.size();
    for (std::size_t k = sol.placed_count; k < objects_.size(); ++k) sol.skipped.push_back(objects_[k].id);
    return sol;
  }

 private:
  struct Saved {
    std::size_t order;
    std::vector<Placement> placements;
  };

  std::span<const SpatialRelation> relations_of(std::size_t k) const {
    if (k >= relations_.relations.size()) return {};
    return relations_.relations[k];
  }

  Placement candidate(std::size_t k, std::size_t index) const {
    const auto c = space_.at(index);
    return make_placement(objects_[k].id, ctx_.surfaces()[c.surface], objects_[k].dims,
                          c.quarter_turns, c.cell);
  }

  /// No solution can place object k when k alone (ignoring relations that
  /// reference other objects) has no candidate, or when the minimum cell area
  /// of objects 0..k exceeds the surface area. Returns the smallest such k,
  /// or the object count.
  std::size_t upper_bound() const {
    std::size_t total_cells = 0;
    for (const auto& s : ctx_.surfaces()) total_cells += s.grid.cell_count();
    std::size_t area = 0;
    for (std::size_t k = 0; k < objects_.size(); ++k) {
      std::size_t min_area = std::numeric_limits<std::size_t>::max();
      for (const auto& s : ctx_.surfaces()) {
        for (int q = 0; q < 4; ++q) {
          const auto f = footprint_for(s, objects_[k].dims, q);
          min_area = std::min(min_area, static_cast<std::size_t>(f.w) * f.h);
        }
      }
      area += min_area;
      if (area > total_cells) return k;
      std::vector<SpatialRelation> unary;
      for (const auto& r : relations_of(k)) {
        if (!relation_ref(r)) unary.push_back(r);
      }
      LayoutContext empty(ctx_.surfaces(), ctx_.obstacles(), ctx_.room());
      bool any = false;
      for (std::size_t idx = 0; idx < space_.size() && !any; ++idx) {
        any = candidate_feasible(candidate(k, idx), unary, empty);
      }
      if (!any) return k;
    }
    return objects_.size();
  }

  void save() {
    ++saved_total_;
    const std::size_t count = ctx_.placed().size();
    if (saved_.size() < budget_.max_saved_solutions) {
      saved_.push_back({saved_total_, ctx_.placed()});
      return;
    }
    // Full: replace the weakest (earliest among equals) if strictly better.
    auto weakest = std::min_element(saved_.begin(), saved_.end(), [](const Saved& a, const Saved& b) {
      if (a.placements.size() != b.placements.size()) return a.placements.size() < b.placements.size();
      return a.order > b.order;
    });
    if (weakest != saved_.end() && count > weakest->placements.size()) {
      *weakest = {saved_total_, ctx_.placed()};
    }
  }

  std::size_t best_saved() const {
    std::size_t b = 0;
    for (const auto& s : saved_) b = std::max(b, s.placements.size());
    return b;
  }

  /// Returns true when the search should stop.
  bool dfs(std::size_t k) {
    if (k == objects_.size()) {
      save();
      return true;
    }
    LazyPermutation perm(space_.size());
    bool any = false;
    while (!perm.empty()) {
      if (nodes_ >= budget_.max_nodes) {
        exhausted_ = true;
        save();
        return true;
      }
      ++nodes_;
      Placement p = candidate(k, perm.next(rng_));
      if (!candidate_feasible(p, relations_of(k), ctx_)) continue;
      any = true;
      ctx_.push(std::move(p));
      const bool stop = dfs(k + 1);
      ctx_.pop();
      if (stop) return true;
      if (best_saved() >= cap_) return true;
    }
    if (!any) {
      save();
      if (best_saved() >= cap_) return true;
    }
    return false;
  }

  const std::vector<ObjectSpec>& objects_;
  const RelationAssignment& relations_;
  LayoutContext& ctx_;
  SolverBudget budget_;
  Rng rng_;
  CandidateSpace space_;
  std::size_t cap_ = 0;
  std::size_t nodes_ = 0;
  std::size_t saved_total_ = 0;
  bool exhausted_ = false;
  std::vector<Saved> saved_;
};

}  // namespace detail

/// Depth-first placement with backtracking over seeded-shuffled candidates.
/// Dead ends save the current prefix; the longest saved prefix wins (earliest
/// discovery breaks ties).
inline LayoutSolution solve_on_surfaces(const std::vector<ObjectSpec>& objects,
                                        const RelationAssignment& relations,
                                        std::vector<Surface> surfaces, std::vector<Aabb> obstacles,
                                        const Aabb& room, const SolverBudget& budget,
                                        std::uint64_t seed) {
  if (budget.max_nodes < 1 || budget.max_saved_solutions < 1) {
    throw InvalidArgument("solver budget values must be >= 1");
  }
  LayoutContext ctx(std::move(surfaces), std::move(obstacles), room);
  return detail::GroupSearch(objects, relations, ctx, budget, seed).run();
}

/// Single-grid form: a floor-like grid with unbounded height.
inline LayoutSolution solve_group(const std::vector<ObjectSpec>& objects,
                                  const RelationAssignment& relations, const PlacementGrid& grid,
                                  const SolverBudget& budget, std::uint64_t seed) {
  const Aabb room{Vec3(grid.origin.x(), grid.origin.y(), -1e9),
                  Vec3(grid.origin.x() + grid.nx * grid.cell_size,
                       grid.origin.y() + grid.ny * grid.cell_size, 1e9)};
  return solve_on_surfaces(objects, relations, {Surface::floor(grid)}, {}, room, budget, seed);
}

// ---------------------------------------------------------------------------
// Room surfaces

struct RoomSpec {
  double width = 8.0;
  double depth = 8.0;
  double height = 3.0;

  void validate() const {
    if (!(width > 0 && depth > 0 && height > 0)) throw InvalidArgument("room dimensions must be > 0");
  }
  Aabb box() const { return {Vec3::Zero(), Vec3(width, depth, height)}; }
};

struct GridSettings {
  double floor_cell = 0.1;
  double wall_cell = 0.1;
  double support_cell = 0.1;
  double wall_min_height = 0.3;  // lowest mounting height for wall objects
};

inline Surface floor_surface(const RoomSpec& room, const GridSettings& gs) {
  return Surface::floor(PlacementGrid::covering(Vec2::Zero(), room.width, room.depth, gs.floor_cell));
}

/// The four walls, each a (horizontal x height) grid starting at
/// wall_min_height. Wall objects face into the room.
inline std::vector<Surface> wall_surfaces(const RoomSpec& room, const GridSettings& gs) {
  std::vector<Surface> walls;
  const double h = room.height - gs.wall_min_height;
  struct Def {
    Vec3 origin, u, normal;
    double length;
    Direction inward;
  };
  const Def defs[4] = {
      {Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), room.width, Direction::N},               // south
      {Vec3(room.width, 0, 0), Vec3::UnitY(), -Vec3::UnitX(), room.depth, Direction::W},     // east
      {Vec3(0, room.depth, 0), Vec3::UnitX(), -Vec3::UnitY(), room.width, Direction::S},     // north
      {Vec3(0, 0, 0), Vec3::UnitY(), Vec3::UnitX(), room.depth, Direction::E},               // west
  };
  for (int w = 0; w < 4; ++w) {
    Surface s;
    s.kind = SurfaceKind::wall;
    s.index = w;
    s.grid = PlacementGrid::covering(Vec2(0.0, gs.wall_min_height), defs[w].length, std::max(0.0, h),
                                     gs.wall_cell);
    s.frame_origin = defs[w].origin;
    s.axis_u = defs[w].u;
    s.axis_v = Vec3::UnitZ();
    s.normal = defs[w].normal;
    s.fixed_quarter_turns = quarter_turns_for(defs[w].inward);
    walls.push_back(s);
  }
  return walls;
}

/// Top face of a placed supporter as a placement surface.
inline Surface support_surface(const Aabb& supporter_box, const GridSettings& gs) {
  Surface s;
  s.kind = SurfaceKind::support;
  s.grid = PlacementGrid::covering(Vec2(supporter_box.min.x(), supporter_box.min.y()),
                                   supporter_box.size().x(), supporter_box.size().y(), gs.support_cell);
  s.frame_origin = Vec3(0, 0, supporter_box.max.z());
  return s;
}

inline LayoutSolution solve_floor(const RoomSpec& room, const GridSettings& gs,
                                  const std::vector<ObjectSpec>& objects,
                                  const RelationAssignment& relations, const SolverBudget& budget,
                                  std::uint64_t seed) {
  return solve_on_surfaces(objects, relations, {floor_surface(room, gs)}, {}, room.box(), budget, seed);
}

/// Wall objects must also stay clear (3D) of everything already placed.
inline LayoutSolution solve_wall(const RoomSpec& room, const GridSettings& gs,
                                 const std::vector<ObjectSpec>& objects,
                                 const RelationAssignment& relations,
                                 const std::vector<Aabb>& floor_boxes, const SolverBudget& budget,
                                 std::uint64_t seed) {
  return solve_on_surfaces(objects, relations, wall_surfaces(room, gs), floor_boxes, room.box(),
                           budget, seed);
}

/// Objects stacked on a supporter's top face. `supporter_box` is the
/// supporter's own AABB; `obstacles` holds every other placed box.
inline LayoutSolution solve_supported(const RoomSpec& room, const GridSettings& gs,
                                      const Aabb& supporter_box,
                                      const std::vector<ObjectSpec>& objects,
                                      const RelationAssignment& relations,
                                      const std::vector<Aabb>& obstacles,
                                      const SolverBudget& budget, std::uint64_t seed) {
  Surface s = support_surface(supporter_box, gs);
  s.index = 0;
  return solve_on_surfaces(objects, relations, {s}, obstacles, room.box(), budget, seed);
}

}  // namespace scenesynth
