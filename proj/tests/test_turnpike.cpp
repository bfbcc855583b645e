#include <gtest/gtest.h>

#include <cmath>

#include "mfg/dgm/finite.hpp"
#include "support/jets.hpp"

using namespace mfg;
using namespace mfg::dgm;
namespace check = mfg::check;

namespace {

const FiniteProblem local_pb{LocalCouplingModel{}};  // T = 5
const FiniteProblem lq_pb{LQModel{}};                // T = 10, L = 3

TurnpikeTarget flat_target(double omega = 0.5) {
  TurnpikeTarget t;
  t.omega = omega;
  t.ubar = [](double x) { return 0.2 * std::sin(2 * pi * x); };
  t.mbar = [](double x) { return 1.0 + 0.4 * std::cos(2 * pi * x); };
  return t;
}

check::Jet one(double, double) { return {1.0}; }

}  // namespace

TEST(Weight, MidpointEndpointsSymmetry) {
  const double T = 10, w = 0.7;
  EXPECT_NEAR(turnpike_weight(T / 2, T, w), std::exp(w * T / 2) / 2, 1e-12);
  const double w0 = turnpike_weight(0, T, w);
  EXPECT_NEAR(w0, 1 / (1 + std::exp(-w * T)), 1e-15);
  EXPECT_GT(w0, 0.5);
  EXPECT_LT(w0, 1.0);
  for (double t : {0.3, 1.7, 4.2}) EXPECT_NEAR(turnpike_weight(t, T, w), turnpike_weight(T - t, T, w), 1e-12);
  double prev = 0;
  for (int k = 0; k <= 100; ++k) {
    const double v = turnpike_weight(0.05 * k, T, w);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(PenaltyULocal, GaugeAndHomogeneity) {
  const TurnpikeTarget tg = flat_target();
  const auto xs = check::uniform_nodes(0, 1, 40);
  const std::vector<double> ts{0.3, 1.0, 2.5, 4.0};
  auto shifted = [&](double t, double x) { return check::Jet{tg.ubar(x) + 3 * t - 1}; };
  FiniteEval e = check::analytic_eval(ts, xs, shifted, one, 5.0);
  EXPECT_NEAR(penalty_u_local(local_pb, tg, 0.1, e), 0.0, 1e-13);

  auto bump = [&](double a) {
    return [&, a](double, double x) { return check::Jet{tg.ubar(x) + a * std::cos(4 * pi * x)}; };
  };
  FiniteEval e1 = check::analytic_eval(ts, xs, bump(0.1), one, 5.0);
  FiniteEval e3 = check::analytic_eval(ts, xs, bump(0.3), one, 5.0);
  const double p1 = penalty_u_local(local_pb, tg, 0.1, e1);
  EXPECT_GT(p1, 0);
  EXPECT_NEAR(penalty_u_local(local_pb, tg, 0.1, e3), 3 * p1, 1e-12);
}

TEST(PenaltyULocal, HandComputedSinglePoint) {
  // t = T/2, flat ubar, u = x - 1/2 on symmetric nodes: mean |x - 1/2| = 1/4 for
  // midpoints of a uniform grid with an even count.
  TurnpikeTarget tg = flat_target(0.4);
  tg.ubar = [](double) { return 0.0; };
  const auto xs = check::uniform_nodes(0, 1, 10);
  auto u = [](double, double x) { return check::Jet{x - 0.5}; };
  FiniteEval e = check::analytic_eval({2.5}, xs, u, one, 5.0);
  const double expected = 0.25 * 2.5 * std::exp(0.4 * 2.5) / 2;
  EXPECT_NEAR(penalty_u_local(local_pb, tg, 0.1, e), expected, 1e-13);
}

TEST(PenaltyMLocal, ZeroAndConstantOffset) {
  const TurnpikeTarget tg = flat_target();
  const auto xs = check::uniform_nodes(0, 1, 16);
  const std::vector<double> ts{0.2, 1.0, 2.5, 4.9};  // 0.2 and 4.9 fall outside [0.5, 4.5]
  auto exact = [&](double, double x) { return check::Jet{tg.mbar(x)}; };
  FiniteEval e = check::analytic_eval(ts, xs, check::Field([](double, double) { return check::Jet{}; }), exact, 5.0);
  EXPECT_EQ(penalty_m_local(local_pb, tg, 0.1, e), 0.0);

  const double eps = 0.03;
  auto off = [&](double, double x) { return check::Jet{tg.mbar(x) + eps}; };
  FiniteEval f = check::analytic_eval(ts, xs, check::Field([](double, double) { return check::Jet{}; }), off, 5.0);
  // In-window times only, divisor 2.
  const double mean_tw = (1.0 * turnpike_weight(1.0, 5, 0.5) + 2.5 * turnpike_weight(2.5, 5, 0.5)) / 2;
  EXPECT_NEAR(penalty_m_local(local_pb, tg, 0.1, f), eps * mean_tw, 1e-13);
}

TEST(PenaltyMLocal, SinglePoint) {
  const TurnpikeTarget tg = flat_target(0.3);
  auto m = [&](double, double x) { return check::Jet{tg.mbar(x) - 0.2}; };
  FiniteEval e = check::analytic_eval({3.0}, {0.6}, check::Field([](double, double) { return check::Jet{}; }), m, 5.0);
  EXPECT_NEAR(penalty_m_local(local_pb, tg, 0.0, e), 0.2 * 3.0 * turnpike_weight(3.0, 5.0, 0.3), 1e-14);
}

TEST(Window, OutsideTimesContributeNothing) {
  const TurnpikeTarget tg = flat_target();
  auto m = [&](double, double x) { return check::Jet{tg.mbar(x) + 1}; };
  FiniteEval e = check::analytic_eval({0.1, 4.95}, {0.3, 0.7}, check::Field([](double, double) { return check::Jet{}; }), m, 5.0);
  EXPECT_EQ(penalty_m_local(local_pb, tg, 0.1, e), 0.0);
  EXPECT_EQ(penalty_u_local(local_pb, tg, 0.1, e), 0.0);
  EXPECT_THROW(penalty_m_local(local_pb, tg, 0.5, e), ConfigError);
  EXPECT_THROW(turnpike_window(5.0, -0.1), ConfigError);
}

TEST(PenaltyLq, UFormGauge) {
  const LQModel lm;
  const TurnpikeTarget tg = lq_target(lm);
  const auto xs = check::uniform_nodes(-3, 3, 30);
  auto u = [&](double t, double x) {
    return check::Jet{0.5 * lm.sqrtC() * x * x + 2 * t, 2.0, lm.sqrtC() * x, lm.sqrtC()};
  };
  FiniteEval e = check::analytic_eval({3.0, 5.0, 7.5}, xs, u, one, 10.0);
  EXPECT_NEAR(penalty_u_lq(lq_pb, tg, 0.2, e), 0.0, 1e-12);
  EXPECT_NEAR(penalty_du_lq(lq_pb, tg, 0.2, e), 0.0, 1e-12);
}

TEST(PenaltyLq, DuFormLinearInSlopeOffset) {
  const LQModel lm;
  const TurnpikeTarget tg = lq_target(lm);
  const auto xs = check::uniform_nodes(-3, 3, 30);
  auto with_b = [&](double b) {
    return [&, b](double, double x) {
      return check::Jet{0.5 * lm.sqrtC() * x * x + b * x, 0.0, lm.sqrtC() * x + b, lm.sqrtC()};
    };
  };
  const std::vector<double> ts{2.5, 5.0};
  FiniteEval e1 = check::analytic_eval(ts, xs, with_b(0.1), one, 10.0);
  FiniteEval e2 = check::analytic_eval(ts, xs, with_b(-0.4), one, 10.0);
  const double p1 = penalty_du_lq(lq_pb, tg, 0.2, e1);
  const double mean_w = (turnpike_weight(2.5, 10, lm.omega()) + turnpike_weight(5, 10, lm.omega())) / 2;
  EXPECT_NEAR(p1, 0.1 * 6.0 * mean_w, 1e-10);
  EXPECT_NEAR(penalty_du_lq(lq_pb, tg, 0.2, e2), 4 * p1, 1e-10);
  EXPECT_DOUBLE_EQ(tg.omega, std::sqrt(2.0));
}

TEST(PenaltyLq, MeanForm) {
  const LQModel lm;
  TurnpikeTarget tg = lq_target(lm);
  const auto xs = check::uniform_nodes(-3, 3, 2000);
  auto gauss = [](double a) {
    return [a](double, double x) {
      const double d = x - a;
      return check::Jet{std::exp(-d * d / 0.5) / std::sqrt(0.5 * pi)};
    };
  };
  const std::vector<double> ts{4.0, 6.0};
  FiniteEval sym = check::analytic_eval(ts, xs, check::Field([](double, double) { return check::Jet{}; }), gauss(0.0), 10.0);
  EXPECT_NEAR(penalty_mu_lq(lq_pb, tg, 0.2, sym), 0.0, 1e-12);

  FiniteEval sh = check::analytic_eval(ts, xs, check::Field([](double, double) { return check::Jet{}; }), gauss(0.3), 10.0);
  const double w = turnpike_weight(4.0, 10, lm.omega());  // equal at 4 and 6
  EXPECT_NEAR(penalty_mu_lq(lq_pb, tg, 0.2, sh), 0.3 * w, 1e-6 * w);

  tg.mu_bar = 0.3;
  EXPECT_NEAR(penalty_mu_lq(lq_pb, tg, 0.2, sh), 0.0, 1e-6 * w);
}

TEST(ZeroWeights, AcceleratedLossEqualsBaselineBitwise) {
  for (bool lq : {false, true}) {
    LossSetup base{lq ? FiniteProblem{LQModel{}} : FiniteProblem{LocalCouplingModel{}},
                   lq ? LossWeights::lq() : LossWeights::local(), {}, {}};
    base.target = lq ? lq_target(LQModel{}) : flat_target();
    LossSetup acc = base;
    acc.turnpike = lq ? TurnpikeSettings::lq(TurnpikeMode::u) : TurnpikeSettings::local();
    acc.turnpike.Cu = 0.0;
    acc.turnpike.Cm = 0.0;

    Rng rng = make_rng(17);
    const NetPair nets = init_nets({8, 8}, rng);
    BatchSpec spec;
    spec.Mt = 10;
    spec.Mx = 64;
    spec.Mb = 32;
    Rng brng = make_rng(18);
    const Batch b = draw_finite_batch(base.problem, spec, brng);

    FiniteEval e1 = evaluate_batch(nets, b, base.problem.T(), base.needs_origin());
    FiniteEval e2 = evaluate_batch(nets, b, acc.problem.T(), acc.needs_origin());
    const LossComponents c1 = total_loss(base, e1, true);
    const LossComponents c2 = total_loss(acc, e2, true);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(c1.total), std::bit_cast<std::uint64_t>(c2.total));
    EXPECT_GT(c2[6] + c2[7], 0.0);  // the penalties were computed
    VectorXd gu1 = VectorXd::Zero(nets.u.num_params()), gm1 = VectorXd::Zero(nets.m.num_params());
    VectorXd gu2 = gu1, gm2 = gm1;
    accumulate(nets, e1, gu1, gm1);
    accumulate(nets, e2, gu2, gm2);
    EXPECT_EQ(gu1, gu2);
    EXPECT_EQ(gm1, gm2);
  }
}
