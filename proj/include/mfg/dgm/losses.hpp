#pragma once

// Monte Carlo residual losses for the finite-horizon system
//
//   -u_t - nu u_xx + 1/2 u_x^2 = F[m],     u(T) = G
//    m_t - nu m_xx - (m u_x)_x = 0,        m(0) = m0
//
// Each kernel returns its loss value and, when given a nonzero scale C, adds
// C * d(loss)/d(jets) into the adjoint slots of the evaluations it read. The
// parameter gradient then follows from nn::accumulate_gradient.

#include <cmath>
#include <variant>
#include <vector>

#include "mfg/models.hpp"
#include "mfg/nn/mlp.hpp"
#include "mfg/sampler.hpp"

namespace mfg::dgm {

using nn::Index;
using nn::MatrixXd;
using nn::VectorXd;

/// Model-specific pieces of the finite-horizon residuals.
struct FiniteProblem {
  Model model;

  bool lq() const { return std::holds_alternative<LQModel>(model); }
  const LQModel& lq_model() const { return std::get<LQModel>(model); }
  const LocalCouplingModel& local_model() const { return std::get<LocalCouplingModel>(model); }

  double T() const {
    return std::visit([](const auto& m) { return m.T; }, model);
  }
  Domain domain() const {
    return std::visit([](const auto& m) { return m.domain(); }, model);
  }
  double nu() const { return lq() ? lq_model().nu() : LocalCouplingModel::kappa; }

  double initial(double x) const { return lq() ? lq_model().m0(x) : eval_m0(local_model(), x); }
  double terminal(double x) const {
    return lq() ? lq_model().terminal(x) : eval_G_local(local_model(), x);
  }
};

struct NetPair {
  nn::Mlp u;  // identity output
  nn::Mlp m;  // exponential output
};

inline nn::Architecture finite_architecture(std::vector<int> hidden, nn::OutputActivation out) {
  nn::Architecture a;
  a.input_dim = 2;
  a.time_inputs = 1;
  a.hidden = std::move(hidden);
  a.output = out;
  return a;
}

inline NetPair init_nets(const std::vector<int>& hidden, Rng& rng) {
  NetPair n;
  n.u = nn::xavier_init(finite_architecture(hidden, nn::OutputActivation::identity), rng);
  n.m = nn::xavier_init(finite_architecture(hidden, nn::OutputActivation::exponential), rng);
  return n;
}

/// Both nets evaluated on every point set of one batch.
struct FiniteEval {
  int Mt = 0, Mx = 0;
  std::vector<double> times, space;
  nn::Evaluation u, m;            // interior tensor grid, point k*Mx + l = (times[k], space[l])
  nn::Evaluation m_init;          // (0, initial_space)
  nn::Evaluation u_term;          // (T, terminal_space)
  std::vector<double> init_x, term_x;
  nn::Evaluation u_pair, m_pair;  // first half x = 0, second half x = 1
  nn::Evaluation u_origin;        // (times[k], 0), only when requested

  Index interior() const { return static_cast<Index>(Mt) * Mx; }
  double x(Index i) const { return space[static_cast<std::size_t>(i % Mx)]; }
  double t(Index i) const { return times[static_cast<std::size_t>(i / Mx)]; }
};

inline MatrixXd tx_inputs(const std::vector<double>& t, const std::vector<double>& x) {
  MatrixXd in(2, static_cast<Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    in(0, static_cast<Index>(i)) = t[i];
    in(1, static_cast<Index>(i)) = x[i];
  }
  return in;
}

inline FiniteEval evaluate_batch(const NetPair& nets, const Batch& b, double T,
                                 bool with_origin = false) {
  FiniteEval e;
  e.Mt = static_cast<int>(b.times.size());
  e.Mx = static_cast<int>(b.space.size());
  e.times = b.times;
  e.space = b.space;
  MatrixXd grid(2, e.interior());
  for (int k = 0; k < e.Mt; ++k)
    for (int l = 0; l < e.Mx; ++l) {
      grid(0, static_cast<Index>(k) * e.Mx + l) = b.times[k];
      grid(1, static_cast<Index>(k) * e.Mx + l) = b.space[l];
    }
  e.u = nn::evaluate(nets.u, grid, nn::JetOrder::second);
  e.m = nn::evaluate(nets.m, grid, nn::JetOrder::second);

  e.init_x = b.initial_space;
  e.term_x = b.terminal_space;
  e.m_init = nn::evaluate(
      nets.m, tx_inputs(std::vector<double>(b.initial_space.size(), 0.0), b.initial_space),
      nn::JetOrder::value);
  e.u_term = nn::evaluate(
      nets.u, tx_inputs(std::vector<double>(b.terminal_space.size(), T), b.terminal_space),
      nn::JetOrder::value);

  if (!b.pairs.empty()) {
    std::vector<double> pt, px;
    for (const auto& p : b.pairs) pt.push_back(p.left.t), px.push_back(p.left.x);
    for (const auto& p : b.pairs) pt.push_back(p.right.t), px.push_back(p.right.x);
    const MatrixXd in = tx_inputs(pt, px);
    e.u_pair = nn::evaluate(nets.u, in, nn::JetOrder::value);
    e.m_pair = nn::evaluate(nets.m, in, nn::JetOrder::value);
  }
  if (with_origin)
    e.u_origin = nn::evaluate(nets.u, tx_inputs(b.times, std::vector<double>(b.times.size(), 0.0)),
                              nn::JetOrder::value);
  return e;
}

/// Adds the parameter gradients implied by the adjoints stored in `e`.
inline void accumulate(const NetPair& nets, const FiniteEval& e, VectorXd& grad_u,
                       VectorXd& grad_m) {
  nn::accumulate_gradient(nets.u, e.u, grad_u);
  nn::accumulate_gradient(nets.m, e.m, grad_m);
  nn::accumulate_gradient(nets.m, e.m_init, grad_m);
  nn::accumulate_gradient(nets.u, e.u_term, grad_u);
  nn::accumulate_gradient(nets.u, e.u_pair, grad_u);
  nn::accumulate_gradient(nets.m, e.m_pair, grad_m);
  nn::accumulate_gradient(nets.u, e.u_origin, grad_u);
}

/// Per-time Monte Carlo estimate of the population mean, (2L / Mx) sum_l x_l m(t_k, x_l).
inline std::vector<double> mc_means(const FiniteEval& e, double volume) {
  std::vector<double> mu(static_cast<std::size_t>(e.Mt), 0.0);
  for (int k = 0; k < e.Mt; ++k) {
    double s = 0.0;
    for (int l = 0; l < e.Mx; ++l) s += e.space[l] * e.m.jets.value(static_cast<Index>(k) * e.Mx + l);
    mu[k] = volume / e.Mx * s;
  }
  return mu;
}

inline double loss_hjb(const FiniteProblem& pb, FiniteEval& e, double scale = 0.0) {
  const Index n = e.interior();
  const double nu = pb.nu();
  const auto& u = e.u.jets;
  const auto& m = e.m.jets;
  std::vector<double> mu;
  if (pb.lq()) mu = mc_means(e, pb.domain().volume());

  VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    const double x = e.x(i);
    double F;
    if (pb.lq()) {
      const LQModel& lm = pb.lq_model();
      const double d = x - mu[static_cast<std::size_t>(i / e.Mx)];
      F = 0.5 * (lm.Q * x * x + lm.B * d * d);
    } else {
      F = eval_F_local(pb.local_model(), x, m.value(i));
    }
    const double ux = u.d1(1, i);
    r(i) = -u.d1(0, i) - nu * u.d2(0, i) + 0.5 * ux * ux - F;
  }
  const double loss = r.squaredNorm() / static_cast<double>(n);
  if (scale == 0.0) return loss;

  const VectorXd g = (2.0 * scale / static_cast<double>(n)) * r;
  auto& ua = e.u.adjoint;
  auto& ma = e.m.adjoint;
  ua.d1.row(0) -= g.transpose();
  ua.d2.row(0) -= nu * g.transpose();
  ua.d1.row(1).array() += g.transpose().array() * u.d1.row(1).array();
  if (pb.lq()) {
    const LQModel& lm = pb.lq_model();
    const double vol = pb.domain().volume();
    for (int k = 0; k < e.Mt; ++k) {
      // dr/dmu = B (x - mu); dmu/dm_l = (2L / Mx) x_l.
      double s = 0.0;
      for (int l = 0; l < e.Mx; ++l) {
        const Index i = static_cast<Index>(k) * e.Mx + l;
        s += g(i) * lm.B * (e.space[l] - mu[k]);
      }
      for (int l = 0; l < e.Mx; ++l)
        ma.value(static_cast<Index>(k) * e.Mx + l) += s * vol / e.Mx * e.space[l];
    }
  } else {
    ma.value -= pb.local_model().gamma * g.transpose();
  }
  return loss;
}

inline double loss_kfp(const FiniteProblem& pb, FiniteEval& e, double scale = 0.0) {
  const Index n = e.interior();
  const double nu = pb.nu();
  const auto& u = e.u.jets;
  const auto& m = e.m.jets;
  const auto ux = u.d1.row(1).array();
  const auto uxx = u.d2.row(0).array();
  const auto mx = m.d1.row(1).array();
  const Eigen::ArrayXXd r =
      m.d1.row(0).array() - nu * m.d2.row(0).array() - (mx * ux + m.value.array() * uxx);
  const double loss = r.square().sum() / static_cast<double>(n);
  if (scale == 0.0) return loss;

  const Eigen::ArrayXXd g = (2.0 * scale / static_cast<double>(n)) * r;
  auto& ua = e.u.adjoint;
  auto& ma = e.m.adjoint;
  ma.d1.row(0).array() += g;
  ma.d2.row(0).array() -= nu * g;
  ma.d1.row(1).array() -= g * ux;
  ma.value.array() -= g * uxx;
  ua.d1.row(1).array() -= g * mx;
  ua.d2.row(0).array() -= g * m.value.array();
  return loss;
}

inline double loss_init(const FiniteProblem& pb, FiniteEval& e, double scale = 0.0) {
  const Index n = e.m_init.size();
  if (n == 0) return 0.0;
  VectorXd r(n);
  for (Index i = 0; i < n; ++i)
    r(i) = e.m_init.jets.value(i) - pb.initial(e.init_x[static_cast<std::size_t>(i)]);
  const double loss = r.squaredNorm() / static_cast<double>(n);
  if (scale != 0.0) e.m_init.adjoint.value += (2.0 * scale / static_cast<double>(n)) * r.transpose();
  return loss;
}

inline double loss_term(const FiniteProblem& pb, FiniteEval& e, double scale = 0.0) {
  const Index n = e.u_term.size();
  if (n == 0) return 0.0;
  VectorXd r(n);
  for (Index i = 0; i < n; ++i)
    r(i) = e.u_term.jets.value(i) - pb.terminal(e.term_x[static_cast<std::size_t>(i)]);
  const double loss = r.squaredNorm() / static_cast<double>(n);
  if (scale != 0.0) e.u_term.adjoint.value += (2.0 * scale / static_cast<double>(n)) * r.transpose();
  return loss;
}

/// |V mean(u)| + |V mean(m) - 1| with V the domain volume. `with_u = false` drops the
/// first term.
inline double loss_norm(const FiniteProblem& pb, FiniteEval& e, double scale = 0.0,
                        bool with_u = true) {
  const Index n = e.interior();
  const double V = pb.domain().volume();
  const double au = V * e.u.jets.value.mean();
  const double am = V * e.m.jets.value.mean() - 1.0;
  const double loss = (with_u ? std::abs(au) : 0.0) + std::abs(am);
  if (scale == 0.0) return loss;
  const double c = scale * V / static_cast<double>(n);
  if (with_u) e.u.adjoint.value.array() += c * sign(au);
  e.m.adjoint.value.array() += c * sign(am);
  return loss;
}

inline double loss_period(FiniteEval& e, double scale = 0.0) {
  const Index n2 = e.u_pair.size();
  if (n2 == 0) return 0.0;  // interval domain
  const Index n = n2 / 2;
  const auto du = e.u_pair.jets.value.head(n) - e.u_pair.jets.value.tail(n);
  const auto dm = e.m_pair.jets.value.head(n) - e.m_pair.jets.value.tail(n);
  const double loss = (du.squaredNorm() + dm.squaredNorm()) / static_cast<double>(n);
  if (scale == 0.0) return loss;
  const double c = 2.0 * scale / static_cast<double>(n);
  e.u_pair.adjoint.value.head(n) += c * du;
  e.u_pair.adjoint.value.tail(n) -= c * du;
  e.m_pair.adjoint.value.head(n) += c * dm;
  e.m_pair.adjoint.value.tail(n) -= c * dm;
  return loss;
}

}  // namespace mfg::dgm
