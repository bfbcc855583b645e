#pragma once

#include <span>
#include <vector>

#include "mfg/common.hpp"

namespace mfg {

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
template <class F>
double simpson(F&& f, double a, double b, int intervals) {
  if (intervals < 2) intervals = 2;
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Trapezoid rule over uniformly spaced samples.
inline double trapezoid(std::span<const double> y, double h) {
  if (y.size() < 2) return 0.0;
  double s = 0.5 * (y.front() + y.back());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s += y[i];
  return s * h;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  out.back() = b;
  return out;
}

/// Linear interpolation of uniformly tabulated values on [a, b]; clamps outside.
inline double interp_uniform(std::span<const double> y, double a, double b, double x) {
  const std::size_t n = y.size();
  if (n == 1) return y[0];
  const double s = (x - a) / (b - a) * static_cast<double>(n - 1);
  if (s <= 0.0) return y.front();
  if (s >= static_cast<double>(n - 1)) return y.back();
  const auto i = static_cast<std::size_t>(s);
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * y[i] + w * y[i + 1];
}

/// Same as interp_uniform but wraps x onto the unit torus first (tables include both 0 and 1).
inline double interp_periodic(std::span<const double> y, double x) {
  double u = x - std::floor(x);
  return interp_uniform(y, 0.0, 1.0, u);
}

}  // namespace mfg
