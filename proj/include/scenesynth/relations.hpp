#pragma once

#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/common.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace scenesynth {

/// Compass direction in the room frame: N = +y, E = +x, S = -y, W = -x.
enum class Direction { N, E, S, W };

inline std::string_view to_string(Direction d) {
  static constexpr std::string_view kNames[] = {"N", "E", "S", "W"};
  return kNames[static_cast<int>(d)];
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "N") return Direction::N;
  if (s == "E") return Direction::E;
  if (s == "S") return Direction::S;
  if (s == "W") return Direction::W;
  return std::nullopt;
}

inline Vec3 direction_vector(Direction d) {
  switch (d) {
    case Direction::N: return {0, 1, 0};
    case Direction::E: return {1, 0, 0};
    case Direction::S: return {0, -1, 0};
    case Direction::W: return {-1, 0, 0};
  }
  return {0, 1, 0};
}

/// Quarter turns about +z that carry canonical forward (+y) onto `d`.
inline int quarter_turns_for(Direction d) {
  switch (d) {
    case Direction::N: return 0;
    case Direction::W: return 1;
    case Direction::S: return 2;
    case Direction::E: return 3;
  }
  return 0;
}

inline Direction direction_of_quarter_turns(int q) {
  static constexpr Direction kDirs[] = {Direction::N, Direction::W, Direction::S, Direction::E};
  return kDirs[((q % 4) + 4) % 4];
}

enum class DirectionalKind { left_of, right_of, in_front_of, behind };

inline std::string_view to_string(DirectionalKind k) {
  static constexpr std::string_view kNames[] = {"left_of", "right_of", "in_front_of", "behind"};
  return kNames[static_cast<int>(k)];
}

namespace rel {

struct Facing {
  Direction direction;
  bool operator==(const Facing&) const = default;
};
struct FaceToward {
  std::string ref;
  bool operator==(const FaceToward&) const = default;
};
struct Near {
  std::string ref;
  double max_dist;
  bool operator==(const Near&) const = default;
};
struct Far {
  std::string ref;
  double min_dist;
  bool operator==(const Far&) const = default;
};
struct Beside {
  std::string ref;
  bool operator==(const Beside&) const = default;
};
struct Directional {
  DirectionalKind kind;
  std::string ref;
  bool operator==(const Directional&) const = default;
};
struct AgainstWall {
  bool operator==(const AgainstWall&) const = default;
};
struct Clearance {
  double min_dist;
  bool operator==(const Clearance&) const = default;
};

}  // namespace rel

using SpatialRelation = std::variant<rel::Facing, rel::FaceToward, rel::Near, rel::Far, rel::Beside,
                                     rel::Directional, rel::AgainstWall, rel::Clearance>;

/// Object id referenced by a relation, if any.
inline const std::string* relation_ref(const SpatialRelation& r) {
  return std::visit(
      [](const auto& v) -> const std::string* {
        if constexpr (requires { v.ref; }) {
          return &v.ref;
        } else {
          return nullptr;
        }
      },
      r);
}

inline nlohmann::json relation_to_json(const SpatialRelation& r) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, rel::Facing>) {
          return {{"type", "facing"}, {"direction", to_string(v.direction)}};
        } else if constexpr (std::is_same_v<T, rel::FaceToward>) {
          return {{"type", "face_toward"}, {"ref", v.ref}};
        } else if constexpr (std::is_same_v<T, rel::Near>) {
          return {{"type", "near"}, {"ref", v.ref}, {"dist", v.max_dist}};
        } else if constexpr (std::is_same_v<T, rel::Far>) {
          return {{"type", "far"}, {"ref", v.ref}, {"dist", v.min_dist}};
        } else if constexpr (std::is_same_v<T, rel::Beside>) {
          return {{"type", "beside"}, {"ref", v.ref}};
        } else if constexpr (std::is_same_v<T, rel::Directional>) {
          return {{"type", to_string(v.kind)}, {"ref", v.ref}};
        } else if constexpr (std::is_same_v<T, rel::AgainstWall>) {
          return {{"type", "against_wall"}};
        } else {
          return {{"type", "clearance"}, {"dist", v.min_dist}};
        }
      },
      r);
}

/// Parses one relation from the wire format. Throws FormatError when the
/// entry is structurally invalid. Range checks (positive distances, backward
/// refs) are the validator's job.
inline SpatialRelation relation_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw FormatError("relation entry must be an object with a string 'type'");
  }
  const auto type = j["type"].get<std::string>();
  auto ref = [&]() {
    if (!j.contains("ref") || !j["ref"].is_string()) {
      throw FormatError(fmt::format("relation '{}' needs a string 'ref'", type));
    }
    return j["ref"].get<std::string>();
  };
  auto dist = [&]() {
    if (!j.contains("dist") || !j["dist"].is_number()) {
      throw FormatError(fmt::format("relation '{}' needs a numeric 'dist'", type));
    }
    return j["dist"].get<double>();
  };
  if (type == "facing") {
    const auto d = parse_direction(j.value("direction", std::string{}));
    if (!d) throw FormatError("facing relation needs direction in {N,E,S,W}");
    return rel::Facing{*d};
  }
  if (type == "face_toward") return rel::FaceToward{ref()};
  if (type == "near") return rel::Near{ref(), dist()};
  if (type == "far") return rel::Far{ref(), dist()};
  if (type == "beside") return rel::Beside{ref()};
  if (type == "left_of") return rel::Directional{DirectionalKind::left_of, ref()};
  if (type == "right_of") return rel::Directional{DirectionalKind::right_of, ref()};
  if (type == "in_front_of") return rel::Directional{DirectionalKind::in_front_of, ref()};
  if (type == "behind") return rel::Directional{DirectionalKind::behind, ref()};
  if (type == "against_wall") return rel::AgainstWall{};
  if (type == "clearance") return rel::Clearance{dist()};
  throw FormatError(fmt::format("unknown relation type '{}'", type));
}

/// An object to be placed: id unique within its group, class and canonical
/// AABB dimensions.
struct ObjectSpec {
  std::string id;
  std::string class_name;
  Vec3 dims = Vec3::Ones();
};

inline nlohmann::json object_to_json(const ObjectSpec& o) {
  return {{"id", o.id}, {"class", o.class_name}, {"dims", {o.dims.x(), o.dims.y(), o.dims.z()}}};
}

struct RelationAssignment {
  std::vector<ObjectSpec> objects;
  std::vector<std::vector<SpatialRelation>> relations;  // parallel to objects

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < objects.size(); ++i) {
      nlohmann::json rels = nlohmann::json::array();
      for (const auto& r : relations[i]) rels.push_back(relation_to_json(r));
      arr.push_back({{"object", object_to_json(objects[i])}, {"relations", rels}});
    }
    return arr;
  }
};

struct Violation {
  std::string object_id;
  std::string message;
};

/// Problem with a single relation given the ids placed before it, or empty.
inline std::optional<std::string> check_relation(const SpatialRelation& r,
                                                 const std::set<std::string>& earlier,
                                                 const std::string& self) {
  if (const auto* ref = relation_ref(r)) {
    if (*ref == self) return fmt::format("relation refers to the object itself");
    if (!earlier.count(*ref)) return fmt::format("ref '{}' is not an earlier object", *ref);
  }
  auto positive = [](double d) { return std::isfinite(d) && d > 0; };
  if (const auto* n = std::get_if<rel::Near>(&r); n && !positive(n->max_dist)) {
    return fmt::format("near distance {} must be > 0", n->max_dist);
  }
  if (const auto* f = std::get_if<rel::Far>(&r); f && !positive(f->min_dist)) {
    return fmt::format("far distance {} must be > 0", f->min_dist);
  }
  if (const auto* c = std::get_if<rel::Clearance>(&r); c && !positive(c->min_dist)) {
    return fmt::format("clearance distance {} must be > 0", c->min_dist);
  }
  return std::nullopt;
}

inline std::vector<Violation> validate_assignment(const RelationAssignment& a) {
  std::vector<Violation> out;
  if (a.relations.size() != a.objects.size()) {
    out.push_back({"", fmt::format("{} relation lists for {} objects", a.relations.size(),
                                   a.objects.size())});
    return out;
  }
  std::set<std::string> earlier;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const auto& id = a.objects[i].id;
    if (earlier.count(id)) out.push_back({id, "duplicate object id"});
    for (const auto& r : a.relations[i]) {
      if (auto msg = check_relation(r, earlier, id)) out.push_back({id, *msg});
    }
    earlier.insert(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backends

struct RelationRequest {
  Group group = Group::floor;
  std::vector<ObjectSpec> placed;  // objects earlier in the order
  ObjectSpec next_object;
};

class RelationBackend {
 public:
  virtual ~RelationBackend() = default;
  /// Proposes relations for `request.next_object`. Output is post-filtered by
  /// infer_relations, so backends may return anything structurally valid.
  virtual std::vector<SpatialRelation> propose(const RelationRequest& request, Rng& rng) = 0;
};

/// Deterministic heuristic backend; no network.
class RuleBasedBackend final : public RelationBackend {
 public:
  std::vector<SpatialRelation> propose(const RelationRequest& req, Rng& rng) override {
    std::vector<SpatialRelation> out;
    const auto& obj = req.next_object;
    const bool small = req.group == Group::obj;
    const bool wall = req.group == Group::wall;

    if (!wall && obj.dims.x() * obj.dims.y() > 1.0 && rng.bernoulli(0.5)) {
      out.push_back(rel::AgainstWall{});
    }
    if (!req.placed.empty() && rng.bernoulli(0.6)) {
      const auto& ref = req.placed[rng.uniform_index(req.placed.size())];
      const double reach = 0.5 * (Vec2(obj.dims.x(), obj.dims.y()).norm() +
                                  Vec2(ref.dims.x(), ref.dims.y()).norm());
      switch (rng.uniform_index(4)) {
        case 0:
          out.push_back(rel::Near{ref.id, reach + (small ? rng.uniform(0.05, 0.2) : rng.uniform(0.3, 1.0))});
          break;
        case 1:
          out.push_back(rel::Far{ref.id, small ? rng.uniform(0.1, 0.3) : rng.uniform(1.0, 2.5)});
          break;
        case 2: out.push_back(rel::Beside{ref.id}); break;
        default: {
          // On a wall every object faces out of the wall, so only sideways
          // relations are meaningful there.
          const auto k = wall ? static_cast<DirectionalKind>(rng.uniform_index(2))
                              : static_cast<DirectionalKind>(rng.uniform_index(4));
          out.push_back(rel::Directional{k, ref.id});
          break;
        }
      }
    }
    out.push_back(rel::Facing{static_cast<Direction>(rng.uniform_index(4))});
    return out;
  }
};

inline constexpr std::size_t kMaxRelationsPerObject = 3;

/// Queries the backend once per object in order (each conditioned only on
/// earlier objects) and drops any relation that fails validation.
inline RelationAssignment infer_relations(const std::vector<ObjectSpec>& objects, Group group,
                                          RelationBackend& backend, std::uint64_t seed) {
  if (objects.empty()) throw InvalidArgument("infer_relations needs at least one object");
  RelationAssignment a;
  a.objects = objects;
  std::set<std::string> earlier;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    Rng rng(hash64(seed, i));
    RelationRequest req{group, {objects.begin(), objects.begin() + static_cast<std::ptrdiff_t>(i)},
                        objects[i]};
    std::vector<SpatialRelation> kept;
    for (auto& r : backend.propose(req, rng)) {
      if (auto msg = check_relation(r, earlier, objects[i].id)) {
        log_warn("dropping relation {} for '{}': {}", relation_to_json(r).dump(), objects[i].id, *msg);
        continue;
      }
      if (kept.size() == kMaxRelationsPerObject) {
        log_warn("dropping relation {} for '{}': more than {} relations",
                 relation_to_json(r).dump(), objects[i].id, kMaxRelationsPerObject);
        continue;
      }
      kept.push_back(std::move(r));
    }
    a.relations.push_back(std::move(kept));
    earlier.insert(objects[i].id);
  }
  return a;
}

/// Parses an external backend reply body. Entries that cannot be parsed are
/// dropped with a warning; a reply that is not a JSON object with a
/// `relations` array yields no relations.
inline std::vector<SpatialRelation> parse_relation_reply(std::string_view body,
                                                         const std::string& object_id) {
  std::vector<SpatialRelation> out;
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("relations") || !j["relations"].is_array()) {
    log_warn("relation backend reply for '{}' does not match the schema; no relations kept", object_id);
    return out;
  }
  for (const auto& entry : j["relations"]) {
    try {
      out.push_back(relation_from_json(entry));
    } catch (const FormatError& e) {
      log_warn("dropping malformed relation for '{}': {}", object_id, e.what());
    }
  }
  return out;
}

inline nlohmann::json relation_request_body(const RelationRequest& req) {
  nlohmann::json placed = nlohmann::json::array();
  for (const auto& p : req.placed) placed.push_back(object_to_json(p));
  return {{"group", to_string(req.group)}, {"placed", placed}, {"next_object", object_to_json(req.next_object)}};
}

}  // namespace scenesynth
