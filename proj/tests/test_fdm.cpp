#include <gtest/gtest.h>

#include <cmath>

#include "mfg/fdm/solver.hpp"
#include "support/manufactured.hpp"

using namespace mfg;
using namespace mfg::fdm;

namespace {

std::vector<double> row_of(const FdmGrid& g, const std::function<double(double)>& f) {
  std::vector<double> r(g.Nh + 1);
  for (int i = 0; i <= g.Nh; ++i) r[i] = f(g.x(i));
  return r;
}

FdmProblem decoupled_problem() {
  LocalCouplingModel model;
  FdmProblem p = local_problem(model);
  p.T = 1.0;
  p.coupling = [model](double x, double) { return model.potential(x) / 50.0; };
  return p;
}

}  // namespace

TEST(PeriodicTridiagonal, MatchesDenseSolve) {
  Rng rng = make_rng(3);
  for (int n : {1, 2, 3, 4, 17, 100}) {
    VectorXd lo(n), di(n), up(n), rhs(n);
    for (int i = 0; i < n; ++i) {
      lo(i) = uniform01(rng) - 0.5;
      up(i) = uniform01(rng) - 0.5;
      di(i) = 2.0 + uniform01(rng);
      rhs(i) = uniform01(rng);
    }
    MatrixXd A = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      A(i, i) += di(i);
      A(i, (i + n - 1) % n) += lo(i);
      A(i, (i + 1) % n) += up(i);
    }
    const VectorXd x = solve_periodic_tridiagonal(lo, di, up, rhs);
    EXPECT_LE((A * x - rhs).lpNorm<Eigen::Infinity>(), 1e-13) << n;
  }
}

TEST(Operators, ConstantAndLinearRows) {
  const FdmGrid g(10, 16, 1.0);
  const auto c = row_of(g, [](double) { return 3.0; });
  for (int i = 0; i <= g.Nh; ++i) {
    EXPECT_EQ(discrete_laplacian(c, g.h(), i), 0.0);
    EXPECT_EQ(forward_difference(c, g.h(), i), 0.0);
  }
  const auto saw = row_of(g, [](double x) { return x; });
  for (int i = 0; i < g.Nh; ++i) EXPECT_NEAR(forward_difference(saw, g.h(), i), 1.0, 1e-12);
  const DiscreteGradient d = discrete_gradient(saw, g.h(), 5);
  EXPECT_NEAR(d.p1, 1.0, 1e-12);
  EXPECT_NEAR(d.p2, 1.0, 1e-12);
}

TEST(Operators, LaplacianIsSecondOrder) {
  double prev = 0.0;
  for (int nh : {16, 32, 64, 128}) {
    const FdmGrid g(1, nh, 1.0);
    const auto r = row_of(g, [](double x) { return std::cos(2 * pi * x); });
    double err = 0.0;
    for (int i = 0; i <= nh; ++i)
      err = std::max(err, std::abs(discrete_laplacian(r, g.h(), i) +
                                   4 * pi * pi * std::cos(2 * pi * g.x(i))));
    EXPECT_LE(err, 4 * pi * pi * std::pow(2 * pi, 2) / 12 * g.h() * g.h() * 1.01);
    if (prev > 0) {
      EXPECT_NEAR(prev / err, 4.0, 0.05);
    }
    prev = err;
  }
}

TEST(NumericalHamiltonian, LowerLowerConeExamples) {
  const NumericalHamiltonian H{ProjectionCone::lower_lower};
  EXPECT_EQ(H.value(-1, -1), 1.0);
  EXPECT_EQ(H.value(1, -1), 0.5);
  EXPECT_EQ(H.value(2, 3), 0.0);
  EXPECT_EQ(H.dp1(-1, -1), -1.0);
  EXPECT_EQ(H.dp2(2, -3), -3.0);
}

TEST(NumericalHamiltonian, SolverConeIsConsistentAndMonotone) {
  const NumericalHamiltonian H;
  for (double p : {-2.0, -0.5, 0.0, 0.3, 4.0}) EXPECT_DOUBLE_EQ(H.value(p, p), 0.5 * p * p);
  EXPECT_EQ(H.value(1, -1), 0.0);
  EXPECT_EQ(H.value(-1, 1), 1.0);
  for (double p1 : {-1.0, 0.5})
    for (double p2 : {-1.0, 0.5}) {
      EXPECT_LE(H.dp1(p1, p2), 0.0);
      EXPECT_GE(H.dp2(p1, p2), 0.0);
    }
  // literal R- x R- cone is not consistent with |p|^2 / 2
  EXPECT_NE(NumericalHamiltonian{ProjectionCone::lower_lower}.value(1, 1), 0.5);
}

TEST(HjbSweep, ZeroDataIsFixedPoint) {
  FdmProblem p;
  p.coupling = [](double, double) { return 0.0; };
  p.terminal = [](double) { return 0.0; };
  p.initial = [](double) { return 1.0; };
  const FdmGrid g(20, 16, 1.0);
  NewtonStats st;
  const MatrixXd U = hjb_newton_sweep(p, g, MatrixXd::Ones(21, 17), {}, &st);
  EXPECT_TRUE(U.isZero(0.0));
  EXPECT_EQ(st.total_iterations, 0);
}

TEST(HjbSweep, SingleStepSatisfiesHandAssembledRow) {
  FdmProblem p;
  p.kappa = 0.5;
  p.coupling = [](double x, double m) { return 2.0 * m + std::cos(2 * pi * x); };
  p.terminal = [](double x) { return std::sin(2 * pi * x); };
  p.initial = [](double) { return 1.0; };
  const FdmGrid g(1, 4, 0.1);
  MatrixXd M(2, 5);
  M << 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 1.5, 1.2, 0.8, 0.5;
  const MatrixXd U = hjb_newton_sweep(p, g, M);
  const NumericalHamiltonian H;
  const double h = 0.25, dt = 0.1;
  // node values of sin(2 pi x) at x = 0, 1/4, 1/2, 3/4
  const double next[4] = {0.0, 1.0, 0.0, -1.0};
  for (int i = 0; i < 4; ++i) {
    const double ui = U(0, i), ur = U(0, (i + 1) % 4), ul = U(0, (i + 3) % 4);
    const double res = -(next[i] - ui) / dt - 0.5 * (ur - 2 * ui + ul) / (h * h) +
                       H.value((ur - ui) / h, (ui - ul) / h) -
                       (2.0 * M(1, i) + std::cos(2 * pi * i * h));
    EXPECT_LE(std::abs(res), 1e-10) << i;
  }
  EXPECT_EQ(U(0, 4), U(0, 0));
}

TEST(HjbSweep, NewtonConvergesQuicklyForQuadraticData) {
  FdmProblem p;
  p.coupling = [](double x, double m) { return m + std::cos(2 * pi * x); };
  p.terminal = [](double x) { return 5.0 * (x - 0.5) * (x - 0.5); };
  p.initial = [](double) { return 1.0; };
  const FdmGrid g(50, 50, 1.0);
  NewtonStats st;
  hjb_newton_sweep(p, g, MatrixXd::Ones(51, 51), {1e-10, 50, {}}, &st);
  EXPECT_LE(st.max_per_step, 10);
  EXPECT_LE(st.worst_residual, 1e-10);
}

TEST(KfpSweep, ConstantValueIsHeatFlowAndConservesMass) {
  const FdmProblem p = local_problem(LocalCouplingModel{});
  const FdmGrid g(100, 64, 5.0);
  const MatrixXd M = kfp_forward_sweep(p, g, MatrixXd::Constant(101, 65, 2.0));
  for (int n = 0; n <= g.NT; ++n)
    EXPECT_NEAR(M.row(n).head(g.Nh).sum() * g.h(), 1.0, 1e-12);
  // heat flow flattens the bump
  EXPECT_LT(M.row(g.NT).maxCoeff() - M.row(g.NT).minCoeff(),
            M.row(0).maxCoeff() - M.row(0).minCoeff());
}

TEST(KfpSweep, MirrorSymmetryPreserved) {
  FdmProblem p;
  p.kappa = 0.5;
  p.initial = [](double x) { return std::exp(-20 * (x - 0.5) * (x - 0.5)); };
  const FdmGrid g(40, 50, 1.0);
  MatrixXd U(41, 51);
  for (int n = 0; n <= 40; ++n)
    for (int i = 0; i <= 50; ++i) U(n, i) = std::cos(2 * pi * g.x(i)) * (1 + g.t(n));
  const MatrixXd M = kfp_forward_sweep(p, g, U);
  for (int n = 0; n <= 40; ++n)
    for (int i = 0; i <= 50; ++i) EXPECT_NEAR(M(n, i), M(n, 50 - i), 1e-10);
}

TEST(KfpSweep, MassAndPositivityUnderStrongDrift) {
  FdmProblem p;
  p.initial = [](double x) { return 1.0 + 0.9 * std::sin(2 * pi * x); };
  const FdmGrid g(50, 80, 1.0);
  Rng rng = make_rng(8);
  MatrixXd U(51, 81);
  for (int n = 0; n <= 50; ++n) {
    for (int i = 0; i < 80; ++i) U(n, i) = 30.0 * (uniform01(rng) - 0.5);
    U(n, 80) = U(n, 0);
  }
  const MatrixXd M = kfp_forward_sweep(p, g, U);
  for (int n = 0; n <= 50; ++n)
    EXPECT_NEAR(M.row(n).head(g.Nh).sum() * g.h(), 1.0, 1e-12);
  EXPECT_GE(M.minCoeff(), 0.0);
}

TEST(FixedPoint, DecoupledConvergesAfterOnePair) {
  const FdmProblem p = decoupled_problem();
  const DiscreteSolution s = fixed_point_solve(p, FdmGrid(20, 32, 1.0));
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.iterations, 2);
  EXPECT_EQ(s.history[1], 0.0);
}

TEST(FixedPoint, ZeroDampingIsPlainPicard) {
  LocalCouplingModel model;
  model.T = 1.0;
  const FdmProblem p = local_problem(model);
  const FdmGrid g(20, 32, 1.0);
  FixedPointOptions opt;
  opt.max_iterations = 3;
  opt.tol = 0.0;
  opt.damping = [](int) { return 0.0; };
  const DiscreteSolution s = fixed_point_solve(p, g, opt);

  const VectorXd m0 = initial_density(p, g);
  MatrixXd M(21, 33);
  for (int n = 0; n <= 20; ++n) {
    M.row(n).head(32) = m0.transpose();
    M(n, 32) = m0(0);
  }
  MatrixXd U;
  for (int k = 0; k < 3; ++k) {
    U = hjb_newton_sweep(p, g, M);
    M = kfp_forward_sweep(p, g, U);
  }
  EXPECT_EQ(s.U, U);
  EXPECT_EQ(s.M, M);
}

TEST(FixedPoint, LocalModelDeskScale) {
  const FdmProblem p = local_problem(LocalCouplingModel{});
  const DiscreteSolution s = fixed_point_solve(p, FdmGrid(200, 200, 5.0));
  EXPECT_TRUE(s.converged) << s.history.back();
  EXPECT_LE(s.iterations, 200);
  EXPECT_LE(s.mass_drift(), 1e-10);
  EXPECT_GE(s.min_density(), -1e-12);
  for (int n = 0; n <= 200; ++n) {
    EXPECT_EQ(s.M(n, 0), s.M(n, 200));
    EXPECT_EQ(s.U(n, 0), s.U(n, 200));
  }
  EXPECT_TRUE(s.trend_decreasing());
}

TEST(Manufactured, DriftFreeSolutionIsSecondOrderInSpace) {
  const auto study = check::manufactured_study(check::ManufacturedCase::drift_free, {16, 32, 64, 128});
  for (std::size_t k = 1; k < study.errors.size(); ++k)
    EXPECT_GE(study.errors[k - 1] / study.errors[k], 3.5) << k;
  EXPECT_LE(study.mass_drift, 1e-10);
}

TEST(Manufactured, UpwindTransportIsFirstOrder) {
  const auto study = check::manufactured_study(check::ManufacturedCase::transport, {16, 32, 64, 128});
  const double last = study.errors[2] / study.errors[3];
  EXPECT_GE(last, 1.7);
  EXPECT_LE(last, 2.6);
}
