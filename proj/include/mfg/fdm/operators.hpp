#pragma once

// Uniform periodic grid on [0,T] x [0,1] and its finite-difference operators.
//
// Rows hold N_h + 1 node values; node N_h is the same point as node 0, so neighbours
// wrap as i - 1 -> N_h - 1 at i = 0 and i + 1 -> 1 at i = N_h.

#include <algorithm>
#include <span>

#include "mfg/common.hpp"
#include "mfg/fdm/periodic_tridiagonal.hpp"

namespace mfg::fdm {

struct FdmGrid {
  int NT = 200;
  int Nh = 200;
  double T = 1.0;

  FdmGrid() = default;
  FdmGrid(int nt, int nh, double horizon) : NT(nt), Nh(nh), T(horizon) { validate(); }

  void validate() const {
    if (NT < 1) throw ConfigError("fdm grid: N_T must be >= 1");
    if (Nh < 3) throw ConfigError("fdm grid: N_h must be >= 3");
    if (!(T > 0.0)) throw ConfigError("fdm grid: T must be > 0");
  }

  double dt() const { return T / NT; }
  double h() const { return 1.0 / Nh; }
  double t(int n) const { return n == NT ? T : n * dt(); }
  double x(int i) const { return i == Nh ? 1.0 : i * h(); }
};

namespace detail {

inline int left(int i, int nh) { return i == 0 ? nh - 1 : i - 1; }
inline int right(int i, int nh) { return i == nh ? 1 : i + 1; }

}  // namespace detail

/// (D_t F)^n = (F^{n+1} - F^n) / dt
inline double time_difference(double next, double cur, double dt) { return (next - cur) / dt; }

/// (D F)_i = (F_{i+1} - F_i) / h
inline double forward_difference(std::span<const double> row, double h, int i) {
  const int nh = static_cast<int>(row.size()) - 1;
  return (row[detail::right(i, nh)] - row[i]) / h;
}

/// (Delta_h F)_i = -(2 F_i - F_{i+1} - F_{i-1}) / h^2
inline double discrete_laplacian(std::span<const double> row, double h, int i) {
  const int nh = static_cast<int>(row.size()) - 1;
  return -(2.0 * row[i] - row[detail::right(i, nh)] - row[detail::left(i, nh)]) / (h * h);
}

struct DiscreteGradient {
  double p1;  // (D F)_i
  double p2;  // (D F)_{i-1}
};

inline DiscreteGradient discrete_gradient(std::span<const double> row, double h, int i) {
  const int nh = static_cast<int>(row.size()) - 1;
  const int l = detail::left(i, nh);
  return {forward_difference(row, h, i), (row[i] - row[l]) / h};
}

/// Cone K used to project (p1, p2) in the numerical Hamiltonian 1/2 |P_K(p1, p2)|^2.
///
/// lower_upper (R- x R+) is the monotone, consistent choice for H = 1/2 |p|^2 and is
/// what the solver uses. lower_lower (R- x R-) is kept for comparison only: it is not
/// consistent with 1/2 |p|^2.
enum class ProjectionCone { lower_upper, lower_lower };

struct NumericalHamiltonian {
  ProjectionCone cone = ProjectionCone::lower_upper;

  double project2(double p2) const {
    return cone == ProjectionCone::lower_upper ? std::max(p2, 0.0) : std::min(p2, 0.0);
  }
  double value(double p1, double p2) const {
    const double a = std::min(p1, 0.0), b = project2(p2);
    return 0.5 * (a * a + b * b);
  }
  double dp1(double p1, double) const { return std::min(p1, 0.0); }
  double dp2(double, double p2) const { return project2(p2); }
};

}  // namespace mfg::fdm
