#pragma once

// Semi-explicit solution of the linear-quadratic MFG on the line.
//
// Value ansatz u(t,x) = phi_t x^2 / 2 + chi_t x + psi_t, density N(mu_t, var_t), with
//   -phi' = -phi^2 + C,           phi_T = 2 Psi
//    mu'  = -(phi mu + chi),      mu_0  given
//    chi' =  B mu + phi chi,      chi_T = -2 Psi r
//   -psi' = nu phi - chi^2/2 + B mu^2/2,   psi_T = Psi r^2
//    var' = -2 phi var + sigma^2
// and the stationary (ergodic) quadratic-Gaussian solution.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfg/common.hpp"
#include "mfg/models.hpp"
#include "mfg/quadrature.hpp"

namespace mfg::lq {

/// Closed-form Riccati solution, written with e^{-2 sqrt(C) (T-t)} so it never overflows.
inline double riccati_phi(const LQModel& m, double t) {
  const double a = m.sqrtC(), g = m.gamma_ric();
  const double e = std::exp(-2.0 * a * (m.T - t));
  return a + 2.0 * a * (g - a) * e / (a * (1.0 + e) + g * (1.0 - e));
}

struct PhiGap {
  double gap;
  double bound;
  bool holds() const { return gap <= bound * (1.0 + 1e-12) + 1e-15; }
};

inline PhiGap phi_turnpike_gap(const LQModel& m, double t) {
  const double a = m.sqrtC();
  return {std::abs(riccati_phi(m, t) - a),
          2.0 * std::abs(a - m.gamma_ric()) * std::exp(-2.0 * a * (m.T - t))};
}

/// Shooting constant chi_0 = c for the constant-coefficient branch sqrt(C) = 2 Psi,
/// hitting chi_T = target:
///
///   c = (target + (e^{-wT} - e^{wT}) B mu0 / (2w))
///       / (e^{-wT}(1 - sqrt(C)/w)/2 + e^{wT}(1 + sqrt(C)/w)/2)
///
/// evaluated after dividing through by e^{wT}.
inline double shooting_c(const LQModel& m, double target) {
  if (!m.semi_explicit())
    throw SolverError("shooting_c: closed form needs sqrt(Q+B) == 2 Psi");
  const double w = m.omega(), a = m.sqrtC();
  if (!(w > 0.0)) throw SolverError("shooting_c: degenerate parameters (Q must be > 0)");
  const double e = std::exp(-w * m.T), e2 = e * e;
  const double num = target * e - (1.0 - e2) * m.B * m.mu0 / (2.0 * w);
  const double den = 0.5 * (1.0 + a / w) + 0.5 * e2 * (1.0 - a / w);
  if (std::abs(den) < 1e-300) throw SolverError("shooting_c: vanishing denominator");
  return num / den;
}

inline double shooting_c(const LQModel& m) { return shooting_c(m, m.chi_terminal()); }

struct MuChi {
  double mu;
  double chi;
};

/// Eigenvectors of A = [[-sqrt C, -1], [B, sqrt C]] for -w and +w, scaled so they stay
/// finite as B -> 0.
struct ModalBasis {
  double w;
  double v1_chi;  // v1 = (1, v1_chi)
  double v2_mu;   // v2 = (v2_mu, 1)

  explicit ModalBasis(const LQModel& m)
      : w(m.omega()), v1_chi(-m.B / (m.sqrtC() + m.omega())),
        v2_mu(-1.0 / (m.sqrtC() + m.omega())) {}

  /// Coordinates (a, b) of X in the basis (v1, v2).
  std::pair<double, double> coords(MuChi x) const {
    const double det = 1.0 - v1_chi * v2_mu;
    return {(x.mu - v2_mu * x.chi) / det, (x.chi - v1_chi * x.mu) / det};
  }
};

/// Classical RK4 on the (mu, chi) system with the exact time-varying phi_t.
inline MuChi rk4_mu_chi(const LQModel& m, MuChi x0, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  auto f = [&](double t, MuChi x) -> MuChi {
    const double p = riccati_phi(m, t);
    return {-(p * x.mu + x.chi), m.B * x.mu + p * x.chi};
  };
  MuChi x = x0;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const MuChi k1 = f(t, x);
    const MuChi k2 = f(t + h / 2, {x.mu + h / 2 * k1.mu, x.chi + h / 2 * k1.chi});
    const MuChi k3 = f(t + h / 2, {x.mu + h / 2 * k2.mu, x.chi + h / 2 * k2.chi});
    const MuChi k4 = f(t + h, {x.mu + h * k3.mu, x.chi + h * k3.chi});
    x.mu += h / 6 * (k1.mu + 2 * k2.mu + 2 * k3.mu + k4.mu);
    x.chi += h / 6 * (k1.chi + 2 * k2.chi + 2 * k3.chi + k4.chi);
  }
  return x;
}

/// exp(A t) X0 through the eigen-decomposition on the constant-coefficient branch,
/// dense RK4 with the exact phi_t otherwise.
inline std::vector<MuChi> mu_chi_trajectory(const LQModel& m, double c,
                                            const std::vector<double>& times) {
  std::vector<MuChi> out(times.size());
  if (m.semi_explicit()) {
    const ModalBasis vb(m);
    const auto [a, b] = vb.coords({m.mu0, c});
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double da = a * std::exp(-vb.w * times[k]);
      const double db = b * std::exp(vb.w * times[k]);
      out[k] = {da + db * vb.v2_mu, da * vb.v1_chi + db};
    }
    return out;
  }
  MuChi x{m.mu0, c};
  double t = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double dt = times[k] - t;
    if (dt != 0.0) x = rk4_mu_chi(m, x, t, times[k], std::max(1, int(std::ceil(std::abs(dt) / 1e-3))));
    t = times[k];
    out[k] = x;
  }
  return out;
}

/// Backward trapezoid quadrature of the psi equation on a uniform grid.
inline std::vector<double> psi_trajectory(const LQModel& m, const std::vector<double>& phi,
                                          const std::vector<double>& chi,
                                          const std::vector<double>& mu,
                                          const std::vector<double>& times) {
  const std::size_t n = times.size();
  std::vector<double> psi(n);
  if (n == 0) return psi;
  auto g = [&](std::size_t k) {
    return m.nu() * phi[k] - 0.5 * chi[k] * chi[k] + 0.5 * m.B * mu[k] * mu[k];
  };
  psi[n - 1] = m.psi_terminal();
  for (std::size_t k = n - 1; k-- > 0;)
    psi[k] = psi[k + 1] + 0.5 * (times[k + 1] - times[k]) * (g(k) + g(k + 1));
  return psi;
}

/// Tabulated finite-horizon solution plus closures.
struct LQFiniteSolution {
  LQModel model;
  double c = 0.0;
  std::vector<double> t, phi, chi, mu, psi, var;

  int size() const { return static_cast<int>(t.size()); }
  double dt() const { return t.size() > 1 ? t[1] - t[0] : model.T; }

  double phi_at(double s) const { return interp_uniform(phi, 0.0, model.T, s); }
  double chi_at(double s) const { return interp_uniform(chi, 0.0, model.T, s); }
  double mu_at(double s) const { return interp_uniform(mu, 0.0, model.T, s); }
  double psi_at(double s) const { return interp_uniform(psi, 0.0, model.T, s); }
  double var_at(double s) const { return interp_uniform(var, 0.0, model.T, s); }

  double u(int k, double x) const { return 0.5 * phi[k] * x * x + chi[k] * x + psi[k]; }
  double du(int k, double x) const { return phi[k] * x + chi[k]; }
  double m(int k, double x) const {
    const double d = x - mu[k];
    return std::exp(-d * d / (2.0 * var[k])) / std::sqrt(2.0 * pi * var[k]);
  }

  double u(double s, double x) const { return 0.5 * phi_at(s) * x * x + chi_at(s) * x + psi_at(s); }
  double du(double s, double x) const { return phi_at(s) * x + chi_at(s); }
  double m(double s, double x) const {
    const double d = x - mu_at(s), v = var_at(s);
    return std::exp(-d * d / (2.0 * v)) / std::sqrt(2.0 * pi * v);
  }
};

namespace detail {

// var' = -2 phi var + sigma^2, RK4 with the exact phi.
inline std::vector<double> variance_path(const LQModel& m, const std::vector<double>& times) {
  std::vector<double> var(times.size());
  const double s2 = m.sigma * m.sigma;
  if (m.semi_explicit()) {
    const double a = m.sqrtC(), inf = s2 / (2.0 * a);
    for (std::size_t k = 0; k < times.size(); ++k)
      var[k] = inf + (m.sigma0 * m.sigma0 - inf) * std::exp(-2.0 * a * times[k]);
    return var;
  }
  auto f = [&](double t, double v) { return -2.0 * riccati_phi(m, t) * v + s2; };
  double v = m.sigma0 * m.sigma0, t = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const int steps = std::max(1, int(std::ceil((times[k] - t) / 1e-3)));
    const double h = (times[k] - t) / steps;
    for (int j = 0; j < steps && h != 0.0; ++j) {
      const double s = t + j * h;
      const double k1 = f(s, v), k2 = f(s + h / 2, v + h / 2 * k1);
      const double k3 = f(s + h / 2, v + h / 2 * k2), k4 = f(s + h, v + h * k3);
      v += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    t = times[k];
    var[k] = v;
  }
  return var;
}

}  // namespace detail

/// chi_0 found by linearity of chi_T in chi_0 (RK4 with the exact phi); works off the
/// constant-coefficient branch but loses accuracy like e^{-2 w T}.
inline double shooting_c_numeric(const LQModel& m, double target, int steps = 20000) {
  const MuChi a = rk4_mu_chi(m, {m.mu0, 0.0}, 0.0, m.T, steps);
  const MuChi b = rk4_mu_chi(m, {0.0, 1.0}, 0.0, m.T, steps);
  if (b.chi == 0.0) throw SolverError("shooting: chi_T does not depend on chi_0");
  return (target - a.chi) / b.chi;
}

inline double shooting_c_numeric(const LQModel& m) { return shooting_c_numeric(m, m.chi_terminal()); }

/// Full solution on nt uniform time nodes over [0, T].
///
/// On the constant-coefficient branch the trajectory is written as
///   X_t = alpha e^{-w t} v1 + beta e^{-w (T - t)} v2
/// with (alpha, beta) fixed by mu_0 and chi_T, so nothing grows like e^{wT}.
inline LQFiniteSolution solve_finite(const LQModel& m, int nt) {
  m.validate();
  if (nt < 2) throw ConfigError("lq: need at least 2 time nodes");
  LQFiniteSolution s;
  s.model = m;
  s.t = linspace(0.0, m.T, nt);
  const std::size_t n = s.t.size();
  s.phi.resize(n);
  s.mu.resize(n);
  s.chi.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.phi[k] = riccati_phi(m, s.t[k]);

  if (m.semi_explicit()) {
    const ModalBasis vb(m);
    const double e = std::exp(-vb.w * m.T);
    // mu_0 = alpha + beta e v2_mu ; chi_T = alpha e v1_chi + beta
    const double rhs_mu = m.mu0, rhs_chi = m.chi_terminal();
    const double det = 1.0 - e * e * vb.v2_mu * vb.v1_chi;
    const double alpha = (rhs_mu - e * vb.v2_mu * rhs_chi) / det;
    const double beta = (rhs_chi - e * vb.v1_chi * rhs_mu) / det;
    for (std::size_t k = 0; k < n; ++k) {
      const double da = alpha * std::exp(-vb.w * s.t[k]);
      const double db = beta * std::exp(-vb.w * (m.T - s.t[k]));
      s.mu[k] = da + db * vb.v2_mu;
      s.chi[k] = da * vb.v1_chi + db;
    }
    s.c = s.chi[0];
  } else {
    s.c = shooting_c_numeric(m);
    const auto x = mu_chi_trajectory(m, s.c, s.t);
    for (std::size_t k = 0; k < n; ++k) {
      s.mu[k] = x[k].mu;
      s.chi[k] = x[k].chi;
    }
  }
  s.psi = psi_trajectory(m, s.phi, s.chi, s.mu, s.t);
  s.var = detail::variance_path(m, s.t);
  return s;
}

/// Quadratic-Gaussian ergodic solution: v(x) = (x - mu)^2 / (2s), m = N(mu, s sigma^2 / 2).
struct LQErgodicSolution {
  double s = 0.0;
  double mu_bar = 0.0;
  double lambda = 0.0;
  double sigma = 1.0;
  double nu = 0.5;

  double variance() const { return s * sigma * sigma / 2.0; }
  double v(double x) const { return (x - mu_bar) * (x - mu_bar) / (2.0 * s); }
  double dv(double x) const { return (x - mu_bar) / s; }
  double d2v(double) const { return 1.0 / s; }
  double alpha(double x) const { return (x - mu_bar) / s; }
  double m(double x) const {
    const double d = x - mu_bar;
    return std::exp(-d * d / (s * sigma * sigma)) / std::sqrt(pi * s * sigma * sigma);
  }
  double dm(double x) const { return -2.0 * (x - mu_bar) / (s * sigma * sigma) * m(x); }
  double d2m(double x) const {
    const double k = 2.0 / (s * sigma * sigma), d = x - mu_bar;
    return (k * k * d * d - k) * m(x);
  }
};

inline LQErgodicSolution lq_ergodic(const LQModel& m) {
  m.validate();
  const double q = m.q(), beta = m.beta();
  if (!(q > 0.0)) throw SolverError("lq_ergodic: need q > 0");
  if (2.0 * q == -beta) throw SolverError("lq_ergodic: need 2q != -beta");
  LQErgodicSolution e;
  e.s = 1.0 / std::sqrt(2.0 * q);
  e.mu_bar = 0.0;
  e.sigma = m.sigma;
  e.nu = m.nu();
  e.lambda = e.nu / e.s - e.mu_bar * e.mu_bar / (2.0 * e.s * e.s) + m.gamma_erg() * e.mu_bar * e.mu_bar;
  return e;
}

struct ErgodicResidual {
  double hjb;  // lambda - nu v'' + |v'|^2/2 - F[m](x)
  double kfp;  // nu m'' + (v' m)'
};

inline ErgodicResidual ergodic_residual(const LQModel& m, const LQErgodicSolution& e, double x) {
  const double F = lq_ergodic_coupling(m, x, e.mu_bar);
  const double hjb = e.lambda - e.nu * e.d2v(x) + 0.5 * e.dv(x) * e.dv(x) - F;
  const double kfp = e.nu * e.d2m(x) + e.d2v(x) * e.m(x) + e.dv(x) * e.dm(x);
  return {hjb, kfp};
}

/// Simpson quadrature of f against the ergodic density on +-6 standard deviations.
template <class F>
double against_ergodic(const LQErgodicSolution& e, F&& f, int intervals = 4000) {
  const double sd = std::sqrt(e.variance());
  return simpson([&](double x) { return f(x) * e.m(x); }, e.mu_bar - 6 * sd, e.mu_bar + 6 * sd,
                 intervals);
}

struct PropositionRow {
  double T;
  double sup_u;   // sup_t  int |u - u(t,0) - v| dm / (e^{-wt} + e^{-w(T-t)})
  double sup_du;  // sup_t  int |Du - Dv| dm / (...)
  double sup_mu;  // sup_t  |mu_t| / (...)
};

struct PropositionReport {
  double omega = 0.0;
  std::vector<PropositionRow> rows;
  double spread_u = 0.0, spread_du = 0.0, spread_mu = 0.0;  // max / min over horizons
  double tolerance = 2.0;

  bool finite() const {
    for (const auto& r : rows)
      if (!std::isfinite(r.sup_u) || !std::isfinite(r.sup_du) || !std::isfinite(r.sup_mu))
        return false;
    return true;
  }
  bool passed() const {
    return finite() && spread_u < tolerance && spread_du < tolerance && spread_mu < tolerance;
  }
};

/// The three turnpike estimates, normalised by e^{-wt} + e^{-w(T-t)} and maximised over t.
inline PropositionReport verify_turnpike_proposition(const LQModel& base,
                                                     const std::vector<double>& horizons,
                                                     int nt = 2001) {
  PropositionReport rep;
  rep.omega = base.omega();
  const LQErgodicSolution erg = lq_ergodic(base);
  const double a = base.sqrtC();
  for (double T : horizons) {
    LQModel m = base;
    m.T = T;
    const LQFiniteSolution s = solve_finite(m, nt);
    PropositionRow row{T, 0.0, 0.0, 0.0};
    for (int k = 0; k < s.size(); ++k) {
      const double t = s.t[k];
      const double w = std::exp(-rep.omega * t) + std::exp(-rep.omega * (T - t));
      const double dphi = s.phi[k] - a, chi = s.chi[k];
      const double eu =
          against_ergodic(erg, [&](double x) { return std::abs(0.5 * dphi * x * x + chi * x); });
      const double edu = against_ergodic(erg, [&](double x) { return std::abs(dphi * x + chi); });
      row.sup_u = std::max(row.sup_u, eu / w);
      row.sup_du = std::max(row.sup_du, edu / w);
      row.sup_mu = std::max(row.sup_mu, std::abs(s.mu[k]) / w);
    }
    rep.rows.push_back(row);
  }
  auto spread = [&](auto get) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& r : rep.rows) {
      lo = std::min(lo, get(r));
      hi = std::max(hi, get(r));
    }
    if (hi == 0.0) return 1.0;  // identically zero estimates
    return lo > 0.0 ? hi / lo : INFINITY;
  };
  rep.spread_u = spread([](const PropositionRow& r) { return r.sup_u; });
  rep.spread_du = spread([](const PropositionRow& r) { return r.sup_du; });
  rep.spread_mu = spread([](const PropositionRow& r) { return r.sup_mu; });
  return rep;
}

}  // namespace mfg::lq
