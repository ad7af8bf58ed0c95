#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <fmt/core.h>
#include <fmt/ranges.h>

#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <algorithm>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace scenesynth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class ScanError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Logging. A single process-wide sink; tests swap it to capture warnings.

enum class LogLevel { debug, info, warn, error };

class Log {
 public:
  using Sink = std::function<void(LogLevel, const std::string&)>;

  static Log& instance() {
    static Log log;
    return log;
  }

  void set_sink(Sink sink) {
    std::lock_guard lock(mutex_);
    sink_ = std::move(sink);
  }

  void set_level(LogLevel level) {
    std::lock_guard lock(mutex_);
    level_ = level;
  }

  void write(LogLevel level, const std::string& msg) {
    std::lock_guard lock(mutex_);
    if (level < level_) return;
    if (sink_) {
      sink_(level, msg);
    } else {
      static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
      fmt::print(stderr, "[{}] {}\n", kNames[static_cast<int>(level)], msg);
    }
  }

 private:
  Log() = default;
  std::mutex mutex_;
  Sink sink_;
  LogLevel level_ = LogLevel::info;
};

template <typename... Args>
void log_info(fmt::format_string<Args...> f, Args&&... args) {
  Log::instance().write(LogLevel::info, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void log_warn(fmt::format_string<Args...> f, Args&&... args) {
  Log::instance().write(LogLevel::warn, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void log_error(fmt::format_string<Args...> f, Args&&... args) {
  Log::instance().write(LogLevel::error, fmt::format(f, std::forward<Args>(args)...));
}

// ---------------------------------------------------------------------------
// Hashing and seeded randomness.
//
// Every random decision in the pipeline flows from a 64-bit seed. Derived
// seeds are produced by hashing so that work items can be processed in any
// order (or in parallel) with identical results.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash64(std::uint64_t a) { return splitmix64(a); }

template <typename... Rest>
inline constexpr std::uint64_t hash64(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return hash64(splitmix64(a) ^ (b + 0x632BE59BD9B4E019ULL + (a << 6) + (a >> 2)),
                static_cast<std::uint64_t>(rest)...);
}

inline std::uint64_t hash_string(std::string_view s) {
  // FNV-1a, then mixed.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(h);
}

/// Seeded generator with portable distributions. std::mt19937_64 output is
/// fully specified by the standard; the standard distributions are not, so
/// uniform draws are derived here by hand.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform real in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(values[i - 1], values[j]);
  }
}

// ---------------------------------------------------------------------------
// Parallel loop. Work items are handed out dynamically; callers must write
// results into per-index slots so the output is schedule independent.

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Small geometry helpers shared by several modules.

/// Rotation about +z by a multiple of 90 degrees. Exact (no trig round-off).
inline Mat3 quarter_turn_rotation(int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  static constexpr int kCos[] = {1, 0, -1, 0};
  static constexpr int kSin[] = {0, 1, 0, -1};
  Mat3 r;
  r << kCos[q], -kSin[q], 0,  //
      kSin[q], kCos[q], 0,    //
      0, 0, 1;
  return r;
}

/// Rigid transform: rotation about +z followed by translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
  }

  static RigidTransform from_matrix(const Mat4& m) {
    RigidTransform t;
    t.rotation = m.block<3, 3>(0, 0);
    t.translation = m.block<3, 1>(0, 3);
    return t;
  }

  bool operator==(const RigidTransform& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

}  // namespace scenesynth
