#pragma once

// Cyclic tridiagonal systems
//
//   lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i],  indices mod n,
//
// solved by Thomas elimination plus a Sherman-Morrison correction for the two corner
// entries lower[0] and upper[n-1].

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "mfg/common.hpp"

namespace mfg::fdm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

// Plain tridiagonal solve; a[0] and c[n-1] are ignored.
inline void thomas(const VectorXd& a, const VectorXd& b, const VectorXd& c, VectorXd& d,
                   VectorXd& scratch) {
  const Index n = b.size();
  scratch.resize(n);
  double beta = b(0);
  if (beta == 0.0) throw SolverError("tridiagonal solve: zero pivot");
  d(0) /= beta;
  for (Index i = 1; i < n; ++i) {
    scratch(i) = c(i - 1) / beta;
    beta = b(i) - a(i) * scratch(i);
    if (beta == 0.0 || !std::isfinite(beta)) throw SolverError("tridiagonal solve: zero pivot");
    d(i) = (d(i) - a(i) * d(i - 1)) / beta;
  }
  for (Index i = n - 2; i >= 0; --i) d(i) -= scratch(i + 1) * d(i + 1);
}

}  // namespace detail

inline VectorXd solve_periodic_tridiagonal(const VectorXd& lower, const VectorXd& diag,
                                           const VectorXd& upper, const VectorXd& rhs) {
  const Index n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n)
    throw std::invalid_argument("periodic tridiagonal: size mismatch");
  if (n < 3) {
    MatrixXd A = MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      A(i, i) += diag(i);
      A(i, (i + n - 1) % n) += lower(i);
      A(i, (i + 1) % n) += upper(i);
    }
    return A.fullPivLu().solve(rhs);
  }
  // A = A' + u v^T with u = (g, 0, ..., 0, upper[n-1]) and v = (1, 0, ..., 0, lower[0] / g).
  const double g = -diag(0);
  VectorXd b = diag;
  b(0) -= g;
  b(n - 1) -= upper(n - 1) * lower(0) / g;

  VectorXd scratch;
  VectorXd y = rhs;
  detail::thomas(lower, b, upper, y, scratch);
  VectorXd z = VectorXd::Zero(n);
  z(0) = g;
  z(n - 1) = upper(n - 1);
  detail::thomas(lower, b, upper, z, scratch);

  const double vy = y(0) + lower(0) / g * y(n - 1);
  const double vz = z(0) + lower(0) / g * z(n - 1);
  if (std::abs(1.0 + vz) < 1e-300) throw SolverError("periodic tridiagonal: singular system");
  return y - (vy / (1.0 + vz)) * z;
}

}  // namespace mfg::fdm
