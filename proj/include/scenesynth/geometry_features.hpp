#pragma once

#include "scenesynth/common.hpp"
#include "scenesynth/mesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <vector>

namespace scenesynth {

inline constexpr std::size_t kDescriptorBins = 64;
inline constexpr std::size_t kDefaultDescriptorSamples = 2048;

/// D2 shape distribution: histogram of pairwise surface-sample distances,
/// normalized by the mesh's AABB diagonal, 64 uniform bins over [0, 1].
struct ShapeDescriptor {
  std::array<double, kDescriptorBins> histogram{};

  Eigen::VectorXd vector() const {
    return Eigen::Map<const Eigen::VectorXd>(histogram.data(), kDescriptorBins);
  }

  static ShapeDescriptor from_vector(const Eigen::VectorXd& v) {
    ShapeDescriptor d;
    for (std::size_t i = 0; i < kDescriptorBins; ++i) d.histogram[i] = v[static_cast<Eigen::Index>(i)];
    return d;
  }

  double sum() const { return std::accumulate(histogram.begin(), histogram.end(), 0.0); }

  double squared_distance(const ShapeDescriptor& o) const {
    double s = 0;
    for (std::size_t i = 0; i < kDescriptorBins; ++i) {
      const double d = histogram[i] - o.histogram[i];
      s += d * d;
    }
    return s;
  }

  double l1_distance(const ShapeDescriptor& o) const {
    double s = 0;
    for (std::size_t i = 0; i < kDescriptorBins; ++i) s += std::abs(histogram[i] - o.histogram[i]);
    return s;
  }

  auto operator<=>(const ShapeDescriptor&) const = default;
};

/// Area-weighted uniform samples on the mesh surface.
inline std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t count, Rng& rng) {
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (!(total > 0)) throw InvalidArgument("cannot sample a mesh with zero surface area");
  std::vector<Vec3> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = rng.uniform01() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const std::size_t t = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double su = std::sqrt(rng.uniform01());
    const double v = rng.uniform01();
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    points.push_back((1 - su) * a + su * (1 - v) * b + su * v * c);
  }
  return points;
}

inline ShapeDescriptor compute_descriptor(const TriangleMesh& mesh,
                                          std::size_t sample_count = kDefaultDescriptorSamples,
                                          std::uint64_t seed = 0) {
  if (sample_count < 2) throw InvalidArgument("descriptor needs at least 2 samples");
  if (mesh.empty()) throw InvalidArgument("descriptor of an empty mesh");
  const double diag = mesh.bounds().diagonal();
  if (!(diag >= 1e-9)) throw InvalidArgument("mesh extent too small for a shape descriptor");

  Rng rng(seed);
  const auto pts = sample_surface(mesh, sample_count, rng);
  std::array<std::uint64_t, kDescriptorBins> counts{};
  const double scale = static_cast<double>(kDescriptorBins) / diag;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).norm() * scale;
      const auto bin = std::min<std::size_t>(static_cast<std::size_t>(d), kDescriptorBins - 1);
      ++counts[bin];
    }
  }
  const double pairs = 0.5 * static_cast<double>(pts.size()) * static_cast<double>(pts.size() - 1);
  ShapeDescriptor out;
  for (std::size_t b = 0; b < kDescriptorBins; ++b) out.histogram[b] = counts[b] / pairs;
  return out;
}

// ---------------------------------------------------------------------------
// k-means

struct ClusterModel {
  std::vector<ShapeDescriptor> centroids;
  std::size_t k() const { return centroids.size(); }

  /// Nearest centroid (L2); ties go to the lowest index.
  std::size_t assign(const ShapeDescriptor& d) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      const double dist = d.squared_distance(centroids[c]);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    return best;
  }
};

struct KMeansResult {
  ClusterModel model;
  std::vector<std::size_t> assignment;
  /// Objective (sum of squared distances) after each assignment step.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
};

inline KMeansResult kmeans_detailed(std::span<const ShapeDescriptor> data, std::size_t k,
                                    std::uint64_t seed, std::size_t max_iterations = 100,
                                    double tolerance = 1e-6) {
  if (k == 0) throw InvalidArgument("k-means needs k >= 1");
  if (data.size() < k) {
    throw InvalidArgument(fmt::format("k-means with k={} needs at least {} points, got {}", k, k,
                                      data.size()));
  }
  Rng rng(seed);
  KMeansResult res;
  auto& cents = res.model.centroids;

  // k-means++ seeding.
  cents.push_back(data[rng.uniform_index(data.size())]);
  std::vector<double> d2(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) d2[i] = data[i].squared_distance(cents[0]);
  while (cents.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0) {
      const double r = rng.uniform01() * total;
      double acc = 0;
      pick = data.size() - 1;
      for (std::size_t i = 0; i < data.size(); ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_index(data.size());
    }
    cents.push_back(data[pick]);
    for (std::size_t i = 0; i < data.size(); ++i) {
      d2[i] = std::min(d2[i], data[i].squared_distance(cents.back()));
    }
  }

  res.assignment.assign(data.size(), 0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double objective = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      res.assignment[i] = res.model.assign(data[i]);
      objective += data[i].squared_distance(cents[res.assignment[i]]);
    }
    res.objective_history.push_back(objective);
    res.iterations = it + 1;

    std::vector<ShapeDescriptor> sums(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& s = sums[res.assignment[i]].histogram;
      for (std::size_t b = 0; b < kDescriptorBins; ++b) s[b] += data[i].histogram[b];
      ++counts[res.assignment[i]];
    }
    double movement = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      ShapeDescriptor next;
      for (std::size_t b = 0; b < kDescriptorBins; ++b) {
        next.histogram[b] = sums[c].histogram[b] / static_cast<double>(counts[c]);
      }
      movement = std::max(movement, std::sqrt(next.squared_distance(cents[c])));
      cents[c] = next;
    }
    if (movement < tolerance) break;
  }
  // Final assignment against the final centroids.
  for (std::size_t i = 0; i < data.size(); ++i) res.assignment[i] = res.model.assign(data[i]);
  return res;
}

inline ClusterModel kmeans(std::span<const ShapeDescriptor> data, std::size_t k, std::uint64_t seed) {
  return kmeans_detailed(data, k, seed).model;
}

/// Shannon entropy (nats) of the nearest-centroid assignment frequencies.
inline double entropy_of_assignments(const ClusterModel& model,
                                     std::span<const ShapeDescriptor> descriptors) {
  if (descriptors.empty()) throw InvalidArgument("entropy of an empty descriptor list");
  std::vector<std::size_t> counts(model.k(), 0);
  for (const auto& d : descriptors) ++counts[model.assign(d)];
  const double n = static_cast<double>(descriptors.size());
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = c / n;
    h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

// ---------------------------------------------------------------------------
// Out-of-domain split: a query is out-of-domain iff its L2 distance to the
// reference mean strictly exceeds the largest reference distance.

struct DomainSplit {
  std::vector<std::size_t> in_domain;
  std::vector<std::size_t> out_of_domain;
  Eigen::VectorXd reference_mean;
  double max_reference_distance = 0;
};

inline DomainSplit out_of_domain_split(std::span<const Eigen::VectorXd> query,
                                       std::span<const Eigen::VectorXd> reference) {
  if (reference.empty()) throw InvalidArgument("out-of-domain split needs a non-empty reference");
  DomainSplit split;
  split.reference_mean = Eigen::VectorXd::Zero(reference.front().size());
  for (const auto& r : reference) split.reference_mean += r;
  split.reference_mean /= static_cast<double>(reference.size());
  for (const auto& r : reference) {
    split.max_reference_distance =
        std::max(split.max_reference_distance, (r - split.reference_mean).norm());
  }
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double d = (query[i] - split.reference_mean).norm();
    (d > split.max_reference_distance ? split.out_of_domain : split.in_domain).push_back(i);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Descriptor cache: JSON map asset_id -> 64 floats, keyed by parameters.

struct DescriptorCache {
  static constexpr int kFormatVersion = 1;
  std::size_t sample_count = kDefaultDescriptorSamples;
  std::uint64_t seed = 0;
  std::map<std::string, ShapeDescriptor> descriptors;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["bins"] = kDescriptorBins;
    j["sample_count"] = sample_count;
    j["seed"] = seed;
    auto& d = j["descriptors"] = nlohmann::json::object();
    for (const auto& [id, desc] : descriptors) d[id] = desc.histogram;
    return j;
  }

  static DescriptorCache from_json(const nlohmann::json& j) {
    if (j.value("format_version", -1) != kFormatVersion) {
      throw FormatError("descriptor cache: unsupported format_version");
    }
    if (j.value("bins", std::size_t{0}) != kDescriptorBins) {
      throw FormatError("descriptor cache: bin count mismatch");
    }
    DescriptorCache c;
    c.sample_count = j.at("sample_count").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, arr] : j.at("descriptors").items()) {
      c.descriptors[id].histogram = arr.get<std::array<double, kDescriptorBins>>();
    }
    return c;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError(fmt::format("cannot write '{}'", path.string()));
    out << to_json().dump();
  }

  /// Returns nullopt when the file is missing or was built with different
  /// parameters.
  static std::optional<DescriptorCache> load_if_compatible(const std::filesystem::path& path,
                                                           std::size_t sample_count,
                                                           std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
      auto c = from_json(nlohmann::json::parse(in));
      if (c.sample_count != sample_count || c.seed != seed) return std::nullopt;
      return c;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
};

}  // namespace scenesynth
