#pragma once

// Glue shared by the command-line tool and the acceptance checks: building loss setups
// from configs and scoring trained LQ nets against the closed form.

#include <optional>

#include "mfg/dgm/ergodic.hpp"
#include "mfg/harness/fields.hpp"

namespace mfg::harness {

inline EvalGrid default_grid(const dgm::FiniteProblem& pb) {
  const int n = pb.lq() ? 2000 : 200;
  return EvalGrid(n, n, pb.T(), pb.domain());
}

/// The local model needs an ergodic solution whenever a turnpike mode is set.
inline dgm::LossSetup finite_setup(const Config& cfg, const Model& model,
                                   std::optional<dgm::TurnpikeMode> mode,
                                   const dgm::ErgodicSolution* ergodic = nullptr) {
  dgm::LossSetup s{dgm::FiniteProblem{model}, {}, {}, {}};
  const bool lq = s.problem.lq();
  s.weights = dgm::loss_weights_from_config(cfg, lq);
  s.turnpike = dgm::turnpike_from_config(cfg, lq, mode);
  if (!s.turnpike.active()) return s;
  if (lq) {
    s.target = dgm::lq_target(s.problem.lq_model());
    if (s.turnpike.omega_override) s.target.omega = *s.turnpike.omega_override;
  } else {
    if (!ergodic) throw ConfigError("turnpike training on the local model needs an ergodic solution");
    s.target = dgm::local_target(*ergodic, s.problem.local_model().gamma, s.turnpike.omega_override);
  }
  return s;
}

struct LqScore {
  std::vector<double> t, mu, mu_exact;
  double mu_rel_l2 = 0.0, u_rel_l2 = 0.0, m_rel_l2 = 0.0;
};

/// Relative L2 errors of trained LQ nets against the closed form on `g`.
inline LqScore score_lq(const dgm::NetPair& nets, const LQModel& model, const EvalGrid& g) {
  const lq::LQFiniteSolution exact = lq::solve_finite(model, g.nt);
  const Fields f = tabulate_dgm(nets, g);
  const Fields ref = tabulate_lq(exact, g);
  LqScore s;
  for (int r = 0; r < g.nt; ++r) s.t.push_back(g.t(r));
  s.mu = lq_mean_curve(f.m, g);
  s.mu_exact = exact.mu;
  s.mu_rel_l2 = rel_error_l2(s.mu, s.mu_exact);
  s.u_rel_l2 = rel_error_l2(f.u, ref.u);
  s.m_rel_l2 = rel_error_l2(f.m, ref.m);
  return s;
}

}  // namespace mfg::harness
