#pragma once

// Manufactured solutions for the finite-difference scheme. Forcing terms are added to
// both equations so that a known smooth (u, m) solves the continuous system; the sup
// error of the discrete solution is then measured on refining grids with dt ~ h^2.
//
// drift_free:  u depends on t only, so the upwind transport sees a zero gradient and the
//              only spatial error is the centred Laplacian (second order).
// transport:   u carries a spatial gradient, exercising the upwind Hamiltonian and
//              transport (first order).

#include <cmath>
#include <vector>

#include "mfg/fdm/solver.hpp"

namespace mfg::check {

enum class ManufacturedCase { drift_free, transport };

struct ManufacturedStudy {
  std::vector<int> Nh;
  std::vector<double> errors;
  double mass_drift = 0.0;
};

inline fdm::FdmProblem manufactured_problem(ManufacturedCase which) {
  using std::cos, std::sin, std::exp;
  const double k = 0.5, T = 0.5, w = 2 * pi;
  auto m_ex = [=](double t, double x) { return 1.0 + 0.5 * exp(-t) * cos(w * x); };
  auto m_t = [=](double t, double x) { return -0.5 * exp(-t) * cos(w * x); };
  auto m_x = [=](double t, double x) { return -0.5 * w * exp(-t) * sin(w * x); };
  auto m_xx = [=](double t, double x) { return -0.5 * w * w * exp(-t) * cos(w * x); };
  const double a = which == ManufacturedCase::transport ? 0.3 : 0.0;
  auto u_ex = [=](double t, double x) { return sin(t) + a * (1 + t) * sin(w * x); };
  auto u_t = [=](double t, double x) { return cos(t) + a * sin(w * x); };
  auto u_x = [=](double t, double x) { return a * (1 + t) * w * cos(w * x); };
  auto u_xx = [=](double t, double x) { return -a * (1 + t) * w * w * sin(w * x); };
  auto coupling = [=](double x, double m) { return m + cos(w * x); };

  fdm::FdmProblem p;
  p.T = T;
  p.kappa = k;
  p.coupling = coupling;
  p.terminal = [=](double x) { return u_ex(T, x); };
  p.initial = [=](double x) { return m_ex(0.0, x); };
  p.normalize_initial = false;
  p.hjb_source = [=](double t, double x) {
    const double ux = u_x(t, x);
    return -u_t(t, x) - k * u_xx(t, x) + 0.5 * ux * ux - coupling(x, m_ex(t, x));
  };
  p.kfp_source = [=](double t, double x) {
    // m_t - k m_xx - (m u_x)_x
    return m_t(t, x) - k * m_xx(t, x) - (m_x(t, x) * u_x(t, x) + m_ex(t, x) * u_xx(t, x));
  };
  return p;
}

inline double manufactured_u(ManufacturedCase which, double t, double x) {
  const double a = which == ManufacturedCase::transport ? 0.3 : 0.0;
  return std::sin(t) + a * (1 + t) * std::sin(2 * pi * x);
}

inline double manufactured_m(double t, double x) {
  return 1.0 + 0.5 * std::exp(-t) * std::cos(2 * pi * x);
}

inline ManufacturedStudy manufactured_study(ManufacturedCase which, const std::vector<int>& Nh) {
  ManufacturedStudy out;
  out.Nh = Nh;
  const fdm::FdmProblem p = manufactured_problem(which);
  for (int nh : Nh) {
    const int nt = static_cast<int>(std::lround(p.T * nh * nh / 4.0));  // dt = 4 h^2
    const fdm::FdmGrid g(nt, nh, p.T);
    fdm::FixedPointOptions opt;
    opt.tol = 1e-12;
    const fdm::DiscreteSolution s = fdm::fixed_point_solve(p, g, opt);
    double err = 0.0;
    for (int n = 0; n <= g.NT; ++n)
      for (int i = 0; i <= g.Nh; ++i) {
        err = std::max(err, std::abs(s.U(n, i) - manufactured_u(which, g.t(n), g.x(i))));
        err = std::max(err, std::abs(s.M(n, i) - manufactured_m(g.t(n), g.x(i))));
      }
    out.errors.push_back(err);
    out.mass_drift = std::max(out.mass_drift, s.mass_drift());
  }
  return out;
}

}  // namespace mfg::check
