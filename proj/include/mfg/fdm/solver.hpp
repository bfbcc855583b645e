#pragma once

// Implicit finite-difference scheme for the periodic MFG system
//
//   -d_t u - kappa u_xx + H(u_x) = F(x, m) + f(t, x),    u(T) = terminal
//    d_t m - kappa m_xx - (m H_p(u_x))_x = g(t, x),       m(0) = initial
//
// with H = |p|^2 / 2 replaced by its projected numerical Hamiltonian. The HJB rows are
// solved backward by Newton's method, the KFP rows forward with the discrete adjoint of
// the linearized HJB operator (so mass is conserved exactly and M stays nonnegative),
// and the two are coupled by a damped fixed point on M.

#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "mfg/fdm/operators.hpp"
#include "mfg/models.hpp"

namespace mfg::fdm {

struct FdmProblem {
  double T = 1.0;
  double kappa = 0.5;
  std::function<double(double x, double m)> coupling;
  std::function<double(double x)> terminal;
  std::function<double(double x)> initial;
  std::function<double(double t, double x)> hjb_source;  // optional
  std::function<double(double t, double x)> kfp_source;  // optional
  bool normalize_initial = true;  // rescale the initial row to discrete mass 1
};

inline FdmProblem local_problem(const LocalCouplingModel& model) {
  model.validate();
  FdmProblem p;
  p.T = model.T;
  p.kappa = LocalCouplingModel::kappa;
  p.coupling = [model](double x, double m) { return eval_F_local(model, x, m); };
  p.terminal = [model](double x) { return eval_G_local(model, x); };
  p.initial = [model](double x) { return eval_m0(model, x); };
  return p;
}

struct NewtonOptions {
  double tol = 1e-10;
  int max_iterations = 50;
  NumericalHamiltonian hamiltonian{};
};

struct NewtonStats {
  int total_iterations = 0;
  int max_per_step = 0;
  double worst_residual = 0.0;
};

/// h * sum over the N_h distinct nodes of a row.
inline double discrete_mass(std::span<const double> row, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < row.size(); ++i) s += row[i];
  return s * h;
}

namespace detail {

inline VectorXd distinct(const MatrixXd& A, int n) { return A.row(n).head(A.cols() - 1).transpose(); }

inline void store(MatrixXd& A, int n, const VectorXd& v) {
  const Index N = v.size();
  A.row(n).head(N) = v.transpose();
  A(n, N) = v(0);
}

struct HjbRow {
  const FdmProblem& pb;
  const NumericalHamiltonian& H;
  double dt, h;
  const VectorXd& next;  // U^{n+1}
  VectorXd rhs;          // F_h[M^{n+1}] + f(t_n)

  double p1(const VectorXd& v, Index i) const { return (v((i + 1) % v.size()) - v(i)) / h; }
  double p2(const VectorXd& v, Index i) const {
    const Index N = v.size();
    return (v(i) - v((i + N - 1) % N)) / h;
  }

  VectorXd residual(const VectorXd& v) const {
    const Index N = v.size();
    VectorXd r(N);
    const double k = pb.kappa / (h * h);
    for (Index i = 0; i < N; ++i) {
      const double lap = v((i + 1) % N) - 2.0 * v(i) + v((i + N - 1) % N);
      r(i) = (v(i) - next(i)) / dt - k * lap + H.value(p1(v, i), p2(v, i)) - rhs(i);
    }
    return r;
  }

  void jacobian(const VectorXd& v, VectorXd& lo, VectorXd& di, VectorXd& up) const {
    const Index N = v.size();
    lo.resize(N);
    di.resize(N);
    up.resize(N);
    const double k = pb.kappa / (h * h);
    for (Index i = 0; i < N; ++i) {
      const double a = H.dp1(p1(v, i), p2(v, i)), b = H.dp2(p1(v, i), p2(v, i));
      di(i) = 1.0 / dt + 2.0 * k - a / h + b / h;
      up(i) = -k + a / h;
      lo(i) = -k - b / h;
    }
  }
};

}  // namespace detail

/// Backward sweep: U^{N_T} = terminal, then one Newton solve per row n = N_T - 1 ... 0
/// against the frozen density M^{n+1}.
inline MatrixXd hjb_newton_sweep(const FdmProblem& pb, const FdmGrid& g, const MatrixXd& M,
                                 const NewtonOptions& opt = {}, NewtonStats* stats = nullptr) {
  g.validate();
  if (M.rows() != g.NT + 1 || M.cols() != g.Nh + 1)
    throw std::invalid_argument("hjb_newton_sweep: density has the wrong shape");
  const int N = g.Nh;
  const double dt = g.dt(), h = g.h();
  MatrixXd U(g.NT + 1, N + 1);
  VectorXd v(N);
  for (int i = 0; i < N; ++i) v(i) = pb.terminal(g.x(i));
  detail::store(U, g.NT, v);

  NewtonStats st;
  VectorXd lo, di, up;
  for (int n = g.NT - 1; n >= 0; --n) {
    const VectorXd next = v;
    detail::HjbRow row{pb, opt.hamiltonian, dt, h, next, VectorXd(N)};
    for (int i = 0; i < N; ++i) {
      row.rhs(i) = pb.coupling(g.x(i), M(n + 1, i));
      if (pb.hjb_source) row.rhs(i) += pb.hjb_source(g.t(n), g.x(i));
    }
    VectorXd r = row.residual(v);
    double rn = r.lpNorm<Eigen::Infinity>();
    int it = 0;
    while (rn > opt.tol) {
      if (it == opt.max_iterations) {
        std::ostringstream msg;
        msg << "hjb newton: no convergence at time row " << n << " after " << it
            << " iterations (residual " << rn << ")";
        throw SolverError(msg.str());
      }
      ++it;
      row.jacobian(v, lo, di, up);
      const VectorXd step = solve_periodic_tridiagonal(lo, di, up, -r);
      double lambda = 1.0;
      VectorXd trial = v + step;
      VectorXd rt = row.residual(trial);
      while (rt.lpNorm<Eigen::Infinity>() >= rn && lambda > 1e-4) {
        lambda *= 0.5;
        trial = v + lambda * step;
        rt = row.residual(trial);
      }
      const double rtn = rt.lpNorm<Eigen::Infinity>();
      const bool roundoff_floor =
          step.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + v.lpNorm<Eigen::Infinity>());
      if (rtn >= rn && roundoff_floor) break;  // already at rounding level
      v = trial;
      r = rt;
      rn = rtn;
      if (roundoff_floor) break;
    }
    st.total_iterations += it;
    st.max_per_step = std::max(st.max_per_step, it);
    st.worst_residual = std::max(st.worst_residual, rn);
    detail::store(U, n, v);
  }
  if (stats) *stats = st;
  return U;
}

/// Initial density row on the N_h distinct nodes.
inline VectorXd initial_density(const FdmProblem& pb, const FdmGrid& g) {
  VectorXd m0(g.Nh);
  for (int i = 0; i < g.Nh; ++i) m0(i) = pb.initial(g.x(i));
  if (pb.normalize_initial) {
    const double mass = m0.sum() * g.h();
    if (!(mass > 0.0)) throw ConfigError("fdm: initial density has no mass");
    m0 /= mass;
  }
  return m0;
}

/// Forward sweep: M^0 = initial, then
///   (M^{n+1} - M^n)/dt - kappa Delta_h M^{n+1} - T(U^{n+1}, M^{n+1}) = g(t_{n+1}).
inline MatrixXd kfp_forward_sweep(const FdmProblem& pb, const FdmGrid& g, const MatrixXd& U,
                                  const NumericalHamiltonian& H = {}) {
  g.validate();
  if (U.rows() != g.NT + 1 || U.cols() != g.Nh + 1)
    throw std::invalid_argument("kfp_forward_sweep: value function has the wrong shape");
  const int N = g.Nh;
  const double dt = g.dt(), h = g.h(), k = pb.kappa / (h * h);
  MatrixXd M(g.NT + 1, N + 1);
  VectorXd m = initial_density(pb, g);
  detail::store(M, 0, m);

  VectorXd a(N), b(N), lo(N), di(N), up(N), rhs(N);
  for (int n = 0; n < g.NT; ++n) {
    const VectorXd u = detail::distinct(U, n + 1);
    for (int i = 0; i < N; ++i) {
      const double p1 = (u((i + 1) % N) - u(i)) / h;
      const double p2 = (u(i) - u((i + N - 1) % N)) / h;
      a(i) = H.dp1(p1, p2);
      b(i) = H.dp2(p1, p2);
    }
    for (int i = 0; i < N; ++i) {
      const int l = (i + N - 1) % N, r = (i + 1) % N;
      di(i) = 1.0 / dt + 2.0 * k - (a(i) - b(i)) / h;
      lo(i) = -k + a(l) / h;
      up(i) = -k - b(r) / h;
      rhs(i) = m(i) / dt;
      if (pb.kfp_source) rhs(i) += pb.kfp_source(g.t(n + 1), g.x(i));
    }
    m = solve_periodic_tridiagonal(lo, di, up, rhs);
    if (!pb.kfp_source && m.minCoeff() < -1e-12) {
      std::ostringstream msg;
      msg << "kfp: negative density " << m.minCoeff() << " at time row " << n + 1;
      throw SolverError(msg.str());
    }
    detail::store(M, n + 1, m);
  }
  return M;
}

struct FixedPointOptions {
  int max_iterations = 200;
  double tol = 1e-6;
  std::function<double(int)> damping = [](int) { return 0.5; };
  int stagnation_window = 20;
  NewtonOptions newton{};
  std::optional<VectorXd> initial_M_row;  // warm start (e.g. an ergodic density), N_h + 1 values
  std::optional<VectorXd> initial_U_row;
};

struct DiscreteSolution {
  FdmGrid grid;
  MatrixXd U, M;
  std::vector<double> history;  // sup distance between successive undamped iterates
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  NewtonStats newton;

  double mass_row(int n) const {
    double s = 0.0;
    for (int i = 0; i < grid.Nh; ++i) s += M(n, i);
    return s * grid.h();
  }
  double mass_drift() const {
    double worst = 0.0;
    for (int n = 0; n <= grid.NT; ++n) worst = std::max(worst, std::abs(mass_row(n) - 1.0));
    return worst;
  }
  double min_density() const { return M.minCoeff(); }
  bool trend_decreasing() const { return history.size() < 2 || history.back() <= history.front(); }
};

/// Damped fixed point: U^{k+1} = HJB(Mtilde^k), M^{k+1} = KFP(U^{k+1}),
/// Mtilde^{k+1} = d(k) Mtilde^k + (1 - d(k)) M^{k+1}.
inline DiscreteSolution fixed_point_solve(const FdmProblem& pb, const FdmGrid& g,
                                          const FixedPointOptions& opt = {}) {
  g.validate();
  if (opt.max_iterations < 1) throw ConfigError("fdm: max_iterations must be >= 1");
  const int rows = g.NT + 1, cols = g.Nh + 1;
  DiscreteSolution sol;
  sol.grid = g;

  MatrixXd Mt(rows, cols);
  if (opt.initial_M_row) {
    if (opt.initial_M_row->size() != cols) throw ConfigError("fdm: warm-start row has wrong size");
    for (int n = 0; n < rows; ++n) Mt.row(n) = opt.initial_M_row->transpose();
  } else {
    const VectorXd m0 = initial_density(pb, g);
    for (int n = 0; n < rows; ++n) detail::store(Mt, n, m0);
  }
  sol.M = Mt;
  sol.U.resize(rows, cols);
  for (int n = 0; n < rows; ++n)
    for (int i = 0; i < cols; ++i)
      sol.U(n, i) = opt.initial_U_row ? (*opt.initial_U_row)(i) : pb.terminal(g.x(i % g.Nh));

  double best = INFINITY;
  int since_best = 0;
  for (int k = 0; k < opt.max_iterations; ++k) {
    NewtonStats ns;
    MatrixXd U = hjb_newton_sweep(pb, g, Mt, opt.newton, &ns);
    MatrixXd M = kfp_forward_sweep(pb, g, U, opt.newton.hamiltonian);
    const double dist = std::max((U - sol.U).lpNorm<Eigen::Infinity>(),
                                 (M - sol.M).lpNorm<Eigen::Infinity>());
    sol.history.push_back(dist);
    sol.U = std::move(U);
    sol.M = std::move(M);
    sol.newton = ns;
    sol.iterations = k + 1;
    if (!std::isfinite(dist)) throw SolverError("fdm: fixed point diverged (non-finite iterate)");
    if (dist <= opt.tol) {
      sol.converged = true;
      break;
    }
    if (dist < best) {
      best = dist;
      since_best = 0;
    } else if (++since_best >= opt.stagnation_window) {
      sol.stagnated = true;
      break;
    }
    const double d = opt.damping(k);
    Mt = d * Mt + (1.0 - d) * sol.M;
  }
  return sol;
}

}  // namespace mfg::fdm
