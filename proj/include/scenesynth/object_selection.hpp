#pragma once

#include "scenesynth/asset_catalog.hpp"
#include "scenesynth/common.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scenesynth {

enum class SelectionMode { uniform, complementary, paired };

inline std::string_view to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::uniform: return "uniform";
    case SelectionMode::complementary: return "complementary";
    case SelectionMode::paired: return "paired";
  }
  return "?";
}

inline SelectionMode parse_selection_mode(std::string_view s) {
  if (s == "uniform") return SelectionMode::uniform;
  if (s == "complementary") return SelectionMode::complementary;
  if (s == "paired") return SelectionMode::paired;
  throw ConfigError(fmt::format("unknown selection mode '{}'", s));
}

/// Restricts sampling to assets whose shape cluster is in `allowed`.
struct ClusterRestriction {
  std::set<int> allowed;
  std::map<std::string, int> asset_cluster;  // asset_id -> cluster id

  bool permits(const std::string& asset_id) const {
    auto it = asset_cluster.find(asset_id);
    return it != asset_cluster.end() && allowed.count(it->second) != 0;
  }
};

struct SelectionConfig {
  std::size_t M1 = 100;
  std::size_t M2 = 50;
  std::size_t per_support_count = 5;
  SelectionMode mode = SelectionMode::uniform;
  std::set<std::string> real_class_list;
  double complementary_prob = 0.7;
  std::optional<std::map<std::string, std::string>> pair_map;
  double pair_prob = 0.0;
  std::optional<ClusterRestriction> cluster_restriction;

  void validate() const {
    if (M1 == 0 || M2 == 0 || per_support_count == 0) {
      throw ConfigError("M1, M2 and per_support_count must be positive");
    }
    if (!(complementary_prob >= 0 && complementary_prob <= 1)) {
      throw ConfigError("complementary_prob must lie in [0, 1]");
    }
    if (!(pair_prob >= 0 && pair_prob <= 1)) throw ConfigError("pair_prob must lie in [0, 1]");
    if (mode == SelectionMode::paired && !pair_map) {
      throw ConfigError("paired selection mode requires a pair_map");
    }
  }
};

struct SupportGroup {
  std::string supporter_id;  // "floor:<i>" or "wall:<i>"
  std::vector<std::string> asset_ids;
};

struct SelectionResult {
  std::vector<std::string> o_floor;
  std::vector<std::string> o_wall;
  std::vector<SupportGroup> o_obj;  // floor supporters first, then wall

  std::size_t total_small_objects() const {
    std::size_t n = 0;
    for (const auto& g : o_obj) n += g.asset_ids.size();
    return n;
  }

  bool operator==(const SelectionResult& o) const {
    if (o_floor != o.o_floor || o_wall != o.o_wall || o_obj.size() != o.o_obj.size()) return false;
    for (std::size_t i = 0; i < o_obj.size(); ++i) {
      if (o_obj[i].supporter_id != o.o_obj[i].supporter_id ||
          o_obj[i].asset_ids != o.o_obj[i].asset_ids) {
        return false;
      }
    }
    return true;
  }
};

/// Even scene indices use uniform sampling, odd ones complementary.
inline SelectionMode alternate_strategy(std::size_t scene_index) {
  return scene_index % 2 == 0 ? SelectionMode::uniform : SelectionMode::complementary;
}

namespace detail {

/// Candidate pools for one group, precomputed once per selection.
class GroupSampler {
 public:
  GroupSampler(const AssetCatalog& catalog, Group group, const SelectionConfig& config)
      : catalog_(catalog), group_(group), config_(config) {
    for (auto id : catalog.group(group)) {
      const auto& r = catalog[id];
      if (config.cluster_restriction && !config.cluster_restriction->permits(r.asset_id)) continue;
      all_.push_back(id);
      (config.real_class_list.count(r.class_name) ? real_ : other_).push_back(id);
      by_class_[r.class_name].push_back(id);
    }
    if (all_.empty()) {
      throw SelectionError(fmt::format("no selectable assets in group '{}'{}", to_string(group),
                                       config.cluster_restriction ? " under the cluster restriction" : ""));
    }
    if (config.mode == SelectionMode::complementary) {
      if (real_.empty()) {
        log_warn("complementary sampling: no real-dataset classes in group '{}', using the full group",
                 to_string(group));
      }
    }
  }

  /// Fills `n` slots according to the configured mode.
  std::vector<std::string> draw(std::size_t n, Rng& rng) const {
    std::vector<std::string> out;
    out.reserve(n);
    while (out.size() < n) {
      const std::size_t base = draw_base(rng);
      out.push_back(catalog_[base].asset_id);
      if (config_.mode == SelectionMode::paired && out.size() < n && rng.bernoulli(config_.pair_prob)) {
        out.push_back(catalog_[draw_pair(catalog_[base].class_name, rng)].asset_id);
      }
    }
    return out;
  }

 private:
  std::size_t pick(const std::vector<std::size_t>& pool, Rng& rng) const {
    return pool[rng.uniform_index(pool.size())];
  }

  std::size_t draw_base(Rng& rng) const {
    if (config_.mode != SelectionMode::complementary) return pick(all_, rng);
    const bool want_real = rng.bernoulli(config_.complementary_prob);
    if (want_real) return pick(real_.empty() ? all_ : real_, rng);
    return pick(other_.empty() ? all_ : other_, rng);
  }

  std::size_t draw_pair(const std::string& cls, Rng& rng) const {
    const auto& pm = *config_.pair_map;
    auto it = pm.find(cls);
    if (it == pm.end()) throw SelectionError(fmt::format("class '{}' has no entry in pair_map", cls));
    auto pool = by_class_.find(it->second);
    if (pool == by_class_.end() || pool->second.empty()) {
      throw SelectionError(fmt::format("paired class '{}' (for '{}') has no selectable asset in group '{}'",
                                       it->second, cls, to_string(group_)));
    }
    return pick(pool->second, rng);
  }

  const AssetCatalog& catalog_;
  Group group_;
  const SelectionConfig& config_;
  std::vector<std::size_t> all_, real_, other_;
  std::map<std::string, std::vector<std::size_t>> by_class_;
};

}  // namespace detail

/// Samples the floor, wall and supported object sets for one scene. Draws are
/// with replacement; the result is a pure function of (catalog, config, seed).
inline SelectionResult select_objects(const AssetCatalog& catalog, const SelectionConfig& config,
                                      std::uint64_t seed) {
  config.validate();
  const detail::GroupSampler floor(catalog, Group::floor, config);
  const detail::GroupSampler wall(catalog, Group::wall, config);
  const detail::GroupSampler obj(catalog, Group::obj, config);

  Rng rng(seed);
  SelectionResult res;
  res.o_floor = floor.draw(config.M1, rng);
  res.o_wall = wall.draw(config.M2, rng);
  for (std::size_t i = 0; i < config.M1; ++i) {
    res.o_obj.push_back({fmt::format("floor:{}", i), obj.draw(config.per_support_count, rng)});
  }
  for (std::size_t i = 0; i < config.M2; ++i) {
    res.o_obj.push_back({fmt::format("wall:{}", i), obj.draw(config.per_support_count, rng)});
  }
  return res;
}

}  // namespace scenesynth
