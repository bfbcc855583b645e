#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mfg {

inline constexpr double pi = std::numbers::pi;

/// Malformed or inconsistent configuration (CLI exit code 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver could not produce a trustworthy result (CLI exit code 2).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training loss became non-finite.
class DivergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Spatial domain of a 1-D model: the flat torus [0,1) or the interval [-L, L].
struct Domain {
  enum class Kind { torus, interval };
  Kind kind = Kind::torus;
  double half_width = 0.5;  // only meaningful for intervals

  static Domain torus() { return {Kind::torus, 0.5}; }
  static Domain interval(double L) { return {Kind::interval, L}; }

  bool is_torus() const { return kind == Kind::torus; }
  double lower() const { return is_torus() ? 0.0 : -half_width; }
  double upper() const { return is_torus() ? 1.0 : half_width; }
  double volume() const { return upper() - lower(); }
  bool contains(double x) const { return x >= lower() && x <= upper(); }
};

/// Worker count: MFG_THREADS if set (>=1), otherwise hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MFG_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  return hw;
}

/// Runs fn(i) for i in [0, n). Tasks are independent; callers reduce results in index
/// order afterwards so the outcome does not depend on the worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

/// Pairwise summation with a fixed split order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

using Rng = std::mt19937_64;

/// Independent stream derived from (master seed, stream index).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d66u};
  return Rng(seq);
}

/// Uniform double in [0, 1) from the top 53 bits (same sequence on every standard library).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// 64-bit FNV-1a, used for config fingerprints in output metadata.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mfg
