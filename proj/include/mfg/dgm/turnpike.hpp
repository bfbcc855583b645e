#pragma once

// Turnpike penalties: pull the finite-horizon solution towards the ergodic one inside
// the window [delta T, (1 - delta) T], weighted by (e^{-w t} + e^{-w (T - t)})^{-1}.
//
// Local model:  (T - t) |u - <u>(t) - ubar|   and   t |m - mbar|
// LQ model:     (2L / Mx) sum |u - u(t, 0) - ubar|   or   (2L / Mx) sum |u_x - Dubar|,
//               together with |(2L / Mx) sum x m - mubar|.
//
// Sums over time average over in-window times only; a batch with no time inside the
// window contributes zero.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "mfg/dgm/losses.hpp"

namespace mfg::dgm {

enum class TurnpikeMode { none, u, du };

inline TurnpikeMode turnpike_mode_from_string(const std::string& s) {
  if (s == "none") return TurnpikeMode::none;
  if (s == "u") return TurnpikeMode::u;
  if (s == "du") return TurnpikeMode::du;
  throw ConfigError("turnpike mode must be none, u or du (got '" + s + "')");
}

inline const char* to_string(TurnpikeMode m) {
  switch (m) {
    case TurnpikeMode::u: return "u";
    case TurnpikeMode::du: return "du";
    default: return "none";
  }
}

inline double turnpike_weight(double t, double T, double omega) {
  return 1.0 / (std::exp(-omega * t) + std::exp(-omega * (T - t)));
}

/// Ergodic targets seen by the penalties.
struct TurnpikeTarget {
  double omega = 1.0;
  std::function<double(double)> ubar;   // local model, and LQ u-form
  std::function<double(double)> dubar;  // LQ du-form
  std::function<double(double)> mbar;   // local model
  double mu_bar = 0.0;                  // LQ
};

/// Ergodic targets of the LQ model: ubar = 1/2 sqrt(C) x^2, Dubar = sqrt(C) x, mean 0.
inline TurnpikeTarget lq_target(const LQModel& m) {
  TurnpikeTarget t;
  t.omega = m.omega();
  const double a = m.sqrtC();
  t.ubar = [a](double x) { return 0.5 * a * x * x; };
  t.dubar = [a](double x) { return a * x; };
  t.mu_bar = 0.0;
  return t;
}

struct Window {
  double lo, hi;
  bool contains(double t) const { return t >= lo && t <= hi; }
};

inline Window turnpike_window(double T, double delta) {
  if (!(delta >= 0.0) || !(delta < 0.5)) throw ConfigError("turnpike window: delta must lie in [0, 1/2)");
  return {delta * T, (1.0 - delta) * T};
}

namespace detail {

inline int count_in(const FiniteEval& e, Window w) {
  int c = 0;
  for (double t : e.times) c += w.contains(t) ? 1 : 0;
  return c;
}

}  // namespace detail

/// mean_k (T - t_k) w(t_k) mean_l |u_kl - <u>_k - ubar(x_l)|
inline double penalty_u_local(const FiniteProblem& pb, const TurnpikeTarget& tg, double delta,
                              FiniteEval& e, double scale = 0.0) {
  const double T = pb.T();
  const Window win = turnpike_window(T, delta);
  const int K = detail::count_in(e, win);
  if (K == 0) return 0.0;
  std::vector<double> ub(static_cast<std::size_t>(e.Mx));
  for (int l = 0; l < e.Mx; ++l) ub[l] = tg.ubar(e.space[l]);

  double total = 0.0;
  std::vector<double> s(static_cast<std::size_t>(e.Mx));
  for (int k = 0; k < e.Mt; ++k) {
    const double t = e.times[k];
    if (!win.contains(t)) continue;
    const Index base = static_cast<Index>(k) * e.Mx;
    const double c = e.u.jets.value.segment(base, e.Mx).mean();
    const double f = (T - t) * turnpike_weight(t, T, tg.omega) / (K * e.Mx);
    double acc = 0.0, smean = 0.0;
    for (int l = 0; l < e.Mx; ++l) {
      const double d = e.u.jets.value(base + l) - c - ub[l];
      acc += std::abs(d);
      s[l] = sign(d);
      smean += s[l];
    }
    total += f * acc;
    if (scale != 0.0) {
      smean /= e.Mx;
      for (int l = 0; l < e.Mx; ++l) e.u.adjoint.value(base + l) += scale * f * (s[l] - smean);
    }
  }
  return total;
}

/// mean_k t_k w(t_k) mean_l |m_kl - mbar(x_l)|
inline double penalty_m_local(const FiniteProblem& pb, const TurnpikeTarget& tg, double delta,
                              FiniteEval& e, double scale = 0.0) {
  const double T = pb.T();
  const Window win = turnpike_window(T, delta);
  const int K = detail::count_in(e, win);
  if (K == 0) return 0.0;
  std::vector<double> mb(static_cast<std::size_t>(e.Mx));
  for (int l = 0; l < e.Mx; ++l) mb[l] = tg.mbar(e.space[l]);

  double total = 0.0;
  for (int k = 0; k < e.Mt; ++k) {
    const double t = e.times[k];
    if (!win.contains(t)) continue;
    const Index base = static_cast<Index>(k) * e.Mx;
    const double f = t * turnpike_weight(t, T, tg.omega) / (K * e.Mx);
    double acc = 0.0;
    for (int l = 0; l < e.Mx; ++l) {
      const double d = e.m.jets.value(base + l) - mb[l];
      acc += std::abs(d);
      if (scale != 0.0) e.m.adjoint.value(base + l) += scale * f * sign(d);
    }
    total += f * acc;
  }
  return total;
}

/// mean_k w(t_k) (2L / Mx) sum_l |u_kl - u(t_k, 0) - ubar(x_l)|; needs e.u_origin.
inline double penalty_u_lq(const FiniteProblem& pb, const TurnpikeTarget& tg, double delta,
                           FiniteEval& e, double scale = 0.0) {
  const double T = pb.T();
  const Window win = turnpike_window(T, delta);
  const int K = detail::count_in(e, win);
  if (K == 0) return 0.0;
  if (e.u_origin.size() != e.Mt)
    throw std::logic_error("penalty_u_lq: batch was evaluated without origin points");
  const double V = pb.domain().volume();
  double total = 0.0;
  for (int k = 0; k < e.Mt; ++k) {
    const double t = e.times[k];
    if (!win.contains(t)) continue;
    const Index base = static_cast<Index>(k) * e.Mx;
    const double u0 = e.u_origin.jets.value(k);
    const double f = turnpike_weight(t, T, tg.omega) * V / (static_cast<double>(K) * e.Mx);
    double acc = 0.0, ssum = 0.0;
    for (int l = 0; l < e.Mx; ++l) {
      const double d = e.u.jets.value(base + l) - u0 - tg.ubar(e.space[l]);
      acc += std::abs(d);
      if (scale != 0.0) {
        e.u.adjoint.value(base + l) += scale * f * sign(d);
        ssum += sign(d);
      }
    }
    if (scale != 0.0) e.u_origin.adjoint.value(k) -= scale * f * ssum;
    total += f * acc;
  }
  return total;
}

/// mean_k w(t_k) (2L / Mx) sum_l |u_x(t_k, x_l) - Dubar(x_l)|
inline double penalty_du_lq(const FiniteProblem& pb, const TurnpikeTarget& tg, double delta,
                            FiniteEval& e, double scale = 0.0) {
  const double T = pb.T();
  const Window win = turnpike_window(T, delta);
  const int K = detail::count_in(e, win);
  if (K == 0) return 0.0;
  const double V = pb.domain().volume();
  double total = 0.0;
  for (int k = 0; k < e.Mt; ++k) {
    const double t = e.times[k];
    if (!win.contains(t)) continue;
    const Index base = static_cast<Index>(k) * e.Mx;
    const double f = turnpike_weight(t, T, tg.omega) * V / (static_cast<double>(K) * e.Mx);
    double acc = 0.0;
    for (int l = 0; l < e.Mx; ++l) {
      const double d = e.u.jets.d1(1, base + l) - tg.dubar(e.space[l]);
      acc += std::abs(d);
      if (scale != 0.0) e.u.adjoint.d1(1, base + l) += scale * f * sign(d);
    }
    total += f * acc;
  }
  return total;
}

/// mean_k w(t_k) |(2L / Mx) sum_l x_l m_kl - mubar|
inline double penalty_mu_lq(const FiniteProblem& pb, const TurnpikeTarget& tg, double delta,
                            FiniteEval& e, double scale = 0.0) {
  const double T = pb.T();
  const Window win = turnpike_window(T, delta);
  const int K = detail::count_in(e, win);
  if (K == 0) return 0.0;
  const double V = pb.domain().volume();
  const std::vector<double> mu = mc_means(e, V);
  double total = 0.0;
  for (int k = 0; k < e.Mt; ++k) {
    const double t = e.times[k];
    if (!win.contains(t)) continue;
    const double f = turnpike_weight(t, T, tg.omega) / K;
    const double d = mu[k] - tg.mu_bar;
    total += f * std::abs(d);
    if (scale != 0.0) {
      const Index base = static_cast<Index>(k) * e.Mx;
      const double c = scale * f * sign(d) * V / e.Mx;
      for (int l = 0; l < e.Mx; ++l) e.m.adjoint.value(base + l) += c * e.space[l];
    }
  }
  return total;
}

}  // namespace mfg::dgm
