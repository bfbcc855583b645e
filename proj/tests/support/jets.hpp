#pragma once

// Batches whose network outputs are replaced by analytic fields, so loss kernels can be
// checked against closed-form values without training anything.

#include <functional>
#include <vector>

#include "mfg/dgm/ergodic.hpp"

namespace mfg::check {

struct Jet {
  double v = 0.0, t = 0.0, x = 0.0, xx = 0.0;
};

using Field = std::function<Jet(double t, double x)>;

inline nn::Evaluation jets_on(const std::vector<double>& t, const std::vector<double>& x,
                              const Field& f, nn::JetOrder order, int input_dim = 2) {
  const int n = static_cast<int>(x.size());
  const int t0 = input_dim - 1;
  nn::Evaluation ev;
  ev.jets = nn::Jets::zeros(order, input_dim, 1, n);
  ev.adjoint = nn::Jets::zeros(order, input_dim, 1, n);
  for (int i = 0; i < n; ++i) {
    const Jet j = f(t.empty() ? 0.0 : t[i], x[i]);
    ev.jets.value(i) = j.v;
    if (order >= nn::JetOrder::first) {
      if (t0) ev.jets.d1(0, i) = j.t;
      ev.jets.d1(t0, i) = j.x;
    }
    if (order == nn::JetOrder::second) ev.jets.d2(0, i) = j.xx;
  }
  return ev;
}

/// Tensor batch (times x space) with analytic u and m; boundary sets are filled from
/// the same fields.
inline dgm::FiniteEval analytic_eval(const std::vector<double>& times,
                                     const std::vector<double>& space, const Field& u,
                                     const Field& m, double T,
                                     const std::vector<double>& boundary = {}) {
  dgm::FiniteEval e;
  e.Mt = static_cast<int>(times.size());
  e.Mx = static_cast<int>(space.size());
  e.times = times;
  e.space = space;
  std::vector<double> gt, gx;
  for (double t : times)
    for (double x : space) gt.push_back(t), gx.push_back(x);
  e.u = jets_on(gt, gx, u, nn::JetOrder::second);
  e.m = jets_on(gt, gx, m, nn::JetOrder::second);
  e.init_x = boundary;
  e.term_x = boundary;
  e.m_init = jets_on(std::vector<double>(boundary.size(), 0.0), boundary, m, nn::JetOrder::value);
  e.u_term = jets_on(std::vector<double>(boundary.size(), T), boundary, u, nn::JetOrder::value);
  std::vector<double> ot(times), ox(times.size(), 0.0);
  e.u_origin = jets_on(ot, ox, u, nn::JetOrder::value);
  return e;
}

inline dgm::ErgodicEval analytic_ergodic(const std::vector<double>& space, const Field& u,
                                         const Field& m) {
  dgm::ErgodicEval e;
  e.space = space;
  e.u = jets_on({}, space, u, nn::JetOrder::second, 1);
  e.m = jets_on({}, space, m, nn::JetOrder::second, 1);
  e.u_ends = jets_on({}, {0.0, 1.0}, u, nn::JetOrder::value, 1);
  e.m_ends = jets_on({}, {0.0, 1.0}, m, nn::JetOrder::value, 1);
  return e;
}

inline std::vector<double> uniform_nodes(double lo, double hi, int n) {
  // Cell midpoints, symmetric about the interval centre.
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * (i + 0.5) / n;
  return x;
}

}  // namespace mfg::check
