#pragma once

// Mini-batch generation for residual training: Beta-distributed times, uniform space
// points, initial/terminal points and periodic boundary pairs.

#include <random>
#include <stdexcept>
#include <vector>

#include "mfg/common.hpp"

namespace mfg {

struct BatchSpec {
  int Mt = 10;
  int Mx = 1024;
  int Mb = 1024;
  double beta_a = 0.5;
  double beta_b = 0.5;
  Domain domain = Domain::torus();
  double T = 1.0;

  int interior_size() const { return Mt * Mx; }

  void validate() const {
    if (Mt < 1 || Mx < 1 || Mb < 1) throw ConfigError("batch sizes must be >= 1");
    if (!(beta_a > 0.0) || !(beta_b > 0.0)) throw ConfigError("beta parameters must be > 0");
    if (!(T > 0.0)) throw ConfigError("batch horizon must be > 0");
  }
};

/// One Beta(a, b) draw. Beta(1/2, 1/2) uses the arcsine law sin^2(pi U / 2).
inline double sample_beta(double a, double b, Rng& rng) {
  if (a == 0.5 && b == 0.5) {
    const double s = std::sin(0.5 * pi * uniform01(rng));
    return s * s;
  }
  if (a == 1.0 && b == 1.0) return uniform01(rng);
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

inline std::vector<double> sample_times(const BatchSpec& spec, Rng& rng, int count) {
  std::vector<double> t(static_cast<std::size_t>(count));
  for (auto& v : t) v = spec.T * sample_beta(spec.beta_a, spec.beta_b, rng);
  return t;
}

inline std::vector<double> sample_times(const BatchSpec& spec, Rng& rng) {
  return sample_times(spec, rng, spec.Mt);
}

inline std::vector<double> sample_space(const BatchSpec& spec, Rng& rng, int count) {
  std::vector<double> x(static_cast<std::size_t>(count));
  const double lo = spec.domain.lower();
  const double width = spec.domain.volume();
  for (auto& v : x) v = lo + width * uniform01(rng);
  return x;
}

struct PointTX {
  double t;
  double x;
};

struct BoundaryPair {
  PointTX left;   // coordinate set to 0
  PointTX right;  // coordinate set to 1
};

/// Pairs of points that differ only in the periodic coordinate (0 vs 1).
inline std::vector<BoundaryPair> boundary_pairs(const BatchSpec& spec, Rng& rng, int count) {
  if (!spec.domain.is_torus())
    throw std::invalid_argument("boundary_pairs: periodic pairs require a torus domain");
  std::vector<BoundaryPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (double t : sample_times(spec, rng, count)) out.push_back({{t, 0.0}, {t, 1.0}});
  return out;
}

/// One training batch for the finite-horizon problem. The interior set is the tensor
/// grid times x space (time-major: point k * Mx + l is (times[k], space[l])).
struct Batch {
  std::vector<double> times;
  std::vector<double> space;
  std::vector<double> initial_space;
  std::vector<double> terminal_space;
  std::vector<BoundaryPair> pairs;  // empty on interval domains
};

inline Batch draw_batch(const BatchSpec& spec, Rng& rng) {
  Batch b;
  b.times = sample_times(spec, rng);
  b.space = sample_space(spec, rng, spec.Mx);
  b.initial_space = sample_space(spec, rng, spec.Mb);
  b.terminal_space = sample_space(spec, rng, spec.Mb);
  if (spec.domain.is_torus()) b.pairs = boundary_pairs(spec, rng, spec.Mb);
  return b;
}

/// Space-only batch for stationary problems.
struct ErgodicBatch {
  std::vector<double> space;
};

inline ErgodicBatch draw_ergodic_batch(const BatchSpec& spec, Rng& rng) {
  return {sample_space(spec, rng, spec.Mx)};
}

}  // namespace mfg
