#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/geometry_features.hpp"
#include "scenesynth/http_backends.hpp"
#include "scenesynth/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scenesynth {

struct SceneClassSet {
  std::string scene_id;
  std::set<std::string> classes;
};

/// Mean over classes c of max_{c' != c} P(c' | c), where P(c' | c) is the
/// fraction of scenes containing c that also contain c'. Presence semantics:
/// multiple instances of a class count once per scene.
inline double context_complexity(std::span<const SceneClassSet> scenes) {
  if (scenes.empty()) throw InvalidArgument("context_complexity needs at least one scene");
  std::map<std::string, std::size_t> index;
  for (const auto& s : scenes) {
    if (s.classes.empty()) throw InvalidArgument(fmt::format("scene '{}' has no classes", s.scene_id));
    for (const auto& c : s.classes) index.try_emplace(c, 0);
  }
  if (index.size() < 2) {
    throw InvalidArgument("context_complexity needs at least two distinct classes");
  }
  std::size_t next = 0;
  for (auto& [c, i] : index) i = next++;
  const std::size_t n = index.size();
  std::vector<std::size_t> single(n, 0), both(n * n, 0);
  std::vector<std::size_t> ids;
  for (const auto& s : scenes) {
    ids.clear();
    for (const auto& c : s.classes) ids.push_back(index[c]);
    for (auto a : ids) {
      ++single[a];
      for (auto b : ids) {
        if (a != b) ++both[a * n + b];
      }
    }
  }
  double sum = 0;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t best = 0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b != a) best = std::max(best, both[a * n + b]);
    }
    sum += static_cast<double>(best) / static_cast<double>(single[a]);
  }
  return sum / static_cast<double>(n);
}

inline constexpr std::size_t kDiversityClusters = 32;

/// Entropy (nats) of k-means cluster assignments. Descriptors are sorted
/// first so the value depends only on the multiset.
inline double geometry_diversity(std::vector<ShapeDescriptor> descriptors, std::size_t k = kDiversityClusters,
                                 std::uint64_t seed = 0) {
  if (k == 0) throw InvalidArgument("geometry_diversity: k must be >= 1");
  if (descriptors.size() < k) {
    throw InvalidArgument(fmt::format(
        "geometry_diversity: {} descriptors for k = {}; use k <= {}", descriptors.size(), k, descriptors.size()));
  }
  std::sort(descriptors.begin(), descriptors.end());
  const ClusterModel model = kmeans(descriptors, k, seed);
  return entropy_of_assignments(model, descriptors);
}

// ---------------------------------------------------------------------------
// Layout scoring

class LayoutScorer {
 public:
  virtual ~LayoutScorer() = default;
  /// Score in [0, 100], or nullopt when no usable score came back.
  virtual std::optional<int> score(const std::vector<RgbImage>& views) = 0;
};

/// Extracts {"score": integer} and clamps it to [0, 100]. Returns nullopt
/// for anything else.
inline std::optional<int> parse_layout_score(std::string_view body) {
  const nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("score")) return std::nullopt;
  const auto& s = j["score"];
  long long v;
  if (s.is_number_integer()) {
    v = s.get<long long>();
  } else if (s.is_string()) {
    try {
      std::size_t used = 0;
      v = std::stoll(s.get<std::string>(), &used);
      if (used != s.get<std::string>().size()) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  if (v < 0 || v > 100) {
    log_warn("layout score {} out of range; clamped", v);
    v = std::clamp<long long>(v, 0, 100);
  }
  return static_cast<int>(v);
}

class HttpLayoutScorer final : public LayoutScorer {
 public:
  HttpLayoutScorer(HttpEndpoint endpoint, std::string prompt)
      : endpoint_(std::move(endpoint)), prompt_(std::move(prompt)) {}

  std::optional<int> score(const std::vector<RgbImage>& views) override {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& v : views) images.push_back(base64_encode(encode_png_rgb(v)));
    try {
      auto s = parse_layout_score(post_json(endpoint_, {{"images", images}, {"prompt", prompt_}}));
      if (!s) log_warn("layout scoring reply is not usable; score marked absent");
      return s;
    } catch (const TransportError& e) {
      log_warn("layout scoring failed: {}; score marked absent", e.what());
      return std::nullopt;
    }
  }

 private:
  HttpEndpoint endpoint_;
  std::string prompt_;
};

/// Scores each scene's views with at most `concurrency` requests in flight.
inline std::vector<std::optional<int>> score_layouts(const std::vector<std::vector<RgbImage>>& scenes,
                                                     LayoutScorer& scorer, std::size_t concurrency = 4) {
  std::vector<std::optional<int>> out(scenes.size());
  parallel_for(scenes.size(), std::max<std::size_t>(1, concurrency),
               [&](std::size_t i) { out[i] = scorer.score(scenes[i]); });
  return out;
}

struct MetricsReport {
  double geometry_diversity_entropy = 0;
  double context_complexity = 0;
  std::vector<std::pair<std::string, std::optional<int>>> layout_scores;  // empty when not requested

  std::optional<double> mean_layout_score() const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [id, s] : layout_scores) {
      if (s) {
        sum += *s;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"geometry_diversity_entropy", geometry_diversity_entropy},
                     {"context_complexity", context_complexity}};
    if (!layout_scores.empty()) {
      nlohmann::json per = nlohmann::json::object();
      std::vector<std::string> missing;
      for (const auto& [id, s] : layout_scores) {
        per[id] = s ? nlohmann::json(*s) : nlohmann::json(nullptr);
        if (!s) missing.push_back(id);
      }
      j["layout_scores"] = per;
      j["layout_scores_missing"] = missing;
      const auto mean = mean_layout_score();
      j["layout_score_mean"] = mean ? nlohmann::json(*mean) : nlohmann::json(nullptr);
    }
    return j;
  }
};

}  // namespace scenesynth
