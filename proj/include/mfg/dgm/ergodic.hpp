#pragma once

// Stationary system on the torus
//
//   lambda - 1/2 u'' + 1/2 u'^2 = F(x, m),   -1/2 m'' - (m u')' = 0,
//   mean u = 0, mean m = 1, u and m periodic,
//
// trained with the same loop structure as the finite-horizon solver. The constant
// lambda is one extra scalar parameter, reached only through the HJB residual.

#include <algorithm>
#include <chrono>
#include <memory>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mfg/dgm/finite.hpp"

namespace mfg::dgm {

struct ErgodicWeights {
  double hjb = 50.0;
  double kfp = 1.0;
  double norm = 50.0;
  double period = 25.0;

  void validate() const {
    for (double c : {hjb, kfp, norm, period})
      if (!(c >= 0.0)) throw ConfigError("ergodic loss weights must be >= 0");
  }
};

struct ErgodicComponents {
  static constexpr std::array<const char*, 4> names = {"hjb", "kfp", "norm", "period"};
  std::array<double, 4> v{};
  double total = 0.0;
};

inline nn::Architecture ergodic_architecture(std::vector<int> hidden, nn::OutputActivation out) {
  nn::Architecture a;
  a.input_dim = 1;
  a.time_inputs = 0;
  a.hidden = std::move(hidden);
  a.output = out;
  return a;
}

/// Nets evaluated on one spatial batch plus the endpoints 0 and 1.
struct ErgodicEval {
  std::vector<double> space;
  nn::Evaluation u, m;
  nn::Evaluation u_ends, m_ends;  // columns: x = 0, x = 1
  double lambda_adjoint = 0.0;
};

inline ErgodicEval evaluate_ergodic(const NetPair& nets, const std::vector<double>& space) {
  ErgodicEval e;
  e.space = space;
  MatrixXd in(1, static_cast<Index>(space.size()));
  for (std::size_t i = 0; i < space.size(); ++i) in(0, static_cast<Index>(i)) = space[i];
  e.u = nn::evaluate(nets.u, in, nn::JetOrder::second);
  e.m = nn::evaluate(nets.m, in, nn::JetOrder::second);
  MatrixXd ends(1, 2);
  ends << 0.0, 1.0;
  e.u_ends = nn::evaluate(nets.u, ends, nn::JetOrder::value);
  e.m_ends = nn::evaluate(nets.m, ends, nn::JetOrder::value);
  return e;
}

/// With grad set, weighted adjoints go into `e` (and e.lambda_adjoint).
inline ErgodicComponents ergodic_losses(double lambda, const LocalCouplingModel& model,
                                        const ErgodicWeights& w, ErgodicEval& e, bool grad) {
  const Index n = e.u.size();
  const double k = LocalCouplingModel::kappa;
  const auto& u = e.u.jets;
  const auto& m = e.m.jets;
  ErgodicComponents out;

  // HJB
  VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    const double ux = u.d1(0, i);
    r(i) = lambda - k * u.d2(0, i) + 0.5 * ux * ux -
           eval_F_local(model, e.space[static_cast<std::size_t>(i)], m.value(i));
  }
  out.v[0] = r.squaredNorm() / static_cast<double>(n);
  if (grad && w.hjb != 0.0) {
    const VectorXd g = (2.0 * w.hjb / static_cast<double>(n)) * r;
    e.lambda_adjoint += g.sum();
    e.u.adjoint.d2.row(0) -= k * g.transpose();
    e.u.adjoint.d1.row(0).array() += g.transpose().array() * u.d1.row(0).array();
    e.m.adjoint.value -= model.gamma * g.transpose();
  }

  // KFP
  {
    const auto ux = u.d1.row(0).array();
    const auto uxx = u.d2.row(0).array();
    const auto mx = m.d1.row(0).array();
    const Eigen::ArrayXXd q = -k * m.d2.row(0).array() - (mx * ux + m.value.array() * uxx);
    out.v[1] = q.square().sum() / static_cast<double>(n);
    if (grad && w.kfp != 0.0) {
      const Eigen::ArrayXXd g = (2.0 * w.kfp / static_cast<double>(n)) * q;
      e.m.adjoint.d2.row(0).array() -= k * g;
      e.m.adjoint.d1.row(0).array() -= g * ux;
      e.m.adjoint.value.array() -= g * uxx;
      e.u.adjoint.d1.row(0).array() -= g * mx;
      e.u.adjoint.d2.row(0).array() -= g * m.value.array();
    }
  }

  // Normalization (unit volume)
  {
    const double au = u.value.mean();
    const double am = m.value.mean() - 1.0;
    out.v[2] = std::abs(au) + std::abs(am);
    if (grad && w.norm != 0.0) {
      const double c = w.norm / static_cast<double>(n);
      e.u.adjoint.value.array() += c * sign(au);
      e.m.adjoint.value.array() += c * sign(am);
    }
  }

  // Periodicity of the values
  {
    const double du = e.u_ends.jets.value(0) - e.u_ends.jets.value(1);
    const double dm = e.m_ends.jets.value(0) - e.m_ends.jets.value(1);
    out.v[3] = du * du + dm * dm;
    if (grad && w.period != 0.0) {
      e.u_ends.adjoint.value(0) += 2.0 * w.period * du;
      e.u_ends.adjoint.value(1) -= 2.0 * w.period * du;
      e.m_ends.adjoint.value(0) += 2.0 * w.period * dm;
      e.m_ends.adjoint.value(1) -= 2.0 * w.period * dm;
    }
  }

  out.total = w.hjb * out.v[0] + w.kfp * out.v[1] + w.norm * out.v[2] + w.period * out.v[3];
  return out;
}

inline double periodic_interp(const std::vector<double>& f, double x) {
  // f holds n + 1 nodes on [0, 1] with f[n] at x = 1.
  const int n = static_cast<int>(f.size()) - 1;
  double y = x - std::floor(x);
  const double s = y * n;
  int i = static_cast<int>(s);
  if (i >= n) i = n - 1;
  const double a = s - i;
  return (1.0 - a) * f[i] + a * f[i + 1];
}

struct ErgodicSolution {
  NetPair nets;
  double lambda = 0.0;
  std::vector<double> x, ubar, mbar;  // uniform tabulation on [0, 1]
  double min_mbar = 0.0;

  double ubar_at(double y) const { return periodic_interp(ubar, y); }
  double mbar_at(double y) const { return periodic_interp(mbar, y); }

  double grid_mean(const std::vector<double>& f) const {
    // Trapezoid on the periodic grid.
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < f.size(); ++i) s += 0.5 * (f[i] + f[i + 1]);
    return s / static_cast<double>(f.size() - 1);
  }
};

inline ErgodicSolution tabulate_ergodic(const NetPair& nets, double lambda, int nodes = 1001) {
  if (nodes < 2) throw ConfigError("ergodic tabulation needs at least 2 nodes");
  ErgodicSolution s;
  s.nets = nets;
  s.lambda = lambda;
  MatrixXd in(1, nodes);
  for (int i = 0; i < nodes; ++i) {
    s.x.push_back(i == nodes - 1 ? 1.0 : static_cast<double>(i) / (nodes - 1));
    in(0, i) = s.x.back();
  }
  const nn::Evaluation u = nn::evaluate(nets.u, in, nn::JetOrder::value, false);
  const nn::Evaluation m = nn::evaluate(nets.m, in, nn::JetOrder::value, false);
  s.ubar.assign(u.jets.value.data(), u.jets.value.data() + nodes);
  s.mbar.assign(m.jets.value.data(), m.jets.value.data() + nodes);
  s.min_mbar = *std::min_element(s.mbar.begin(), s.mbar.end());
  return s;
}

/// omega = 1/2 min(2 pi^2 min mbar, gamma)
inline double rate_local(double min_mbar, double gamma) {
  if (!(min_mbar > 0.0)) throw SolverError("rate_local: ergodic density minimum must be > 0");
  return 0.5 * std::min(2.0 * pi * pi * min_mbar, gamma);
}

inline double rate_local(const ErgodicSolution& s, double gamma) { return rate_local(s.min_mbar, gamma); }

struct ErgodicRecord {
  long long iter = 0;
  double lambda = 0.0;
  ErgodicComponents train, validation;
};

struct ErgodicReport {
  ErgodicSolution solution;
  std::vector<ErgodicRecord> records;
  double wall_seconds = 0.0;
};

struct ErgodicSettings {
  TrainSettings train;
  ErgodicWeights weights;
  int tabulation_nodes = 1001;

  static ErgodicSettings desk() {
    ErgodicSettings s;
    s.train.hidden = {50, 50};
    s.train.iterations = 20000;
    s.train.schedule = {1e-2, 1e-5, 20000};
    s.train.batch.Mx = 1024;
    return s;
  }
};

inline ErgodicReport ergodic_train(const LocalCouplingModel& model, const ErgodicSettings& es,
                                   const std::function<void(const ErgodicRecord&)>& on_log = {}) {
  const TrainSettings& ts = es.train;
  ts.validate();
  es.weights.validate();
  const auto start = std::chrono::steady_clock::now();
  Rng init_rng = make_rng(ts.seed, 0);
  Rng train_rng = make_rng(ts.seed, 1);
  Rng val_rng = make_rng(ts.seed, 2);
  BatchSpec spec = ts.batch;
  spec.domain = Domain::torus();

  NetPair nets;
  nets.u = nn::xavier_init(ergodic_architecture(ts.hidden, nn::OutputActivation::identity), init_rng);
  nets.m = nn::xavier_init(ergodic_architecture(ts.hidden, nn::OutputActivation::exponential), init_rng);
  double lambda = 0.0;
  nn::AdamState au(nets.u.num_params(), ts.schedule), am(nets.m.num_params(), ts.schedule),
      al(1, ts.schedule);

  ErgodicReport rep;
  auto validation = [&] {
    if (!ts.validate_each_log) return ErgodicComponents{};
    ErgodicEval ve = evaluate_ergodic(nets, draw_ergodic_batch(spec, val_rng).space);
    return ergodic_losses(lambda, model, es.weights, ve, false);
  };
  auto record = [&](long long it, const ErgodicComponents& c) {
    ErgodicRecord r{it, lambda, c, validation()};
    rep.records.push_back(r);
    if (on_log) on_log(r);
  };

  for (long long it = 0; it < ts.iterations; ++it) {
    ErgodicEval e = evaluate_ergodic(nets, draw_ergodic_batch(spec, train_rng).space);
    const ErgodicComponents c = ergodic_losses(lambda, model, es.weights, e, true);
    if (!std::isfinite(c.total))
      throw DivergenceError("ergodic training diverged at iteration " + std::to_string(it));
    if (it % ts.log_every == 0) record(it, c);
    VectorXd gu = VectorXd::Zero(nets.u.num_params());
    VectorXd gm = VectorXd::Zero(nets.m.num_params());
    nn::accumulate_gradient(nets.u, e.u, gu);
    nn::accumulate_gradient(nets.u, e.u_ends, gu);
    nn::accumulate_gradient(nets.m, e.m, gm);
    nn::accumulate_gradient(nets.m, e.m_ends, gm);
    if (!gu.allFinite() || !gm.allFinite() || !std::isfinite(e.lambda_adjoint))
      throw DivergenceError("ergodic training diverged at iteration " + std::to_string(it));
    nn::adam_step(au, nets.u.params(), gu);
    nn::adam_step(am, nets.m.params(), gm);
    VectorXd lam(1), glam(1);
    lam(0) = lambda;
    glam(0) = e.lambda_adjoint;
    nn::adam_step(al, lam, glam);
    lambda = lam(0);
  }
  {
    ErgodicEval e = evaluate_ergodic(nets, draw_ergodic_batch(spec, train_rng).space);
    const ErgodicComponents c = ergodic_losses(lambda, model, es.weights, e, false);
    if (!std::isfinite(c.total)) throw DivergenceError("ergodic training diverged");
    record(ts.iterations, c);
  }
  rep.solution = tabulate_ergodic(nets, lambda, es.tabulation_nodes);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// Targets for the local-model penalties, read from the tabulation.
inline TurnpikeTarget local_target(const ErgodicSolution& s, double gamma,
                                   std::optional<double> omega_override = {}) {
  TurnpikeTarget t;
  t.omega = omega_override ? *omega_override : rate_local(s, gamma);
  auto sol = std::make_shared<ErgodicSolution>(s);
  t.ubar = [sol](double x) { return sol->ubar_at(x); };
  t.mbar = [sol](double x) { return sol->mbar_at(x); };
  return t;
}

inline std::string ergodic_log_csv(const std::vector<ErgodicRecord>& records) {
  std::string out = "iter,lambda";
  for (const char* n : ErgodicComponents::names) out += std::string(",") + n;
  out += ",total,val_total\n";
  char buf[64];
  for (const auto& r : records) {
    out += std::to_string(r.iter);
    std::snprintf(buf, sizeof buf, ",%.17g", r.lambda);
    out += buf;
    for (double v : r.train.v) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.train.total, r.validation.total);
    out += buf;
  }
  return out;
}

/// ergodic.* keys, on top of the desk defaults.
inline ErgodicSettings ergodic_settings_from_config(const Config& cfg) {
  ErgodicSettings es = ErgodicSettings::desk();
  TrainSettings& ts = es.train;
  if (cfg.has("ergodic.hidden")) ts.hidden = parse_widths(cfg.get("ergodic.hidden", std::string()));
  ts.iterations = cfg.get("ergodic.iterations", ts.iterations);
  ts.schedule.initial = cfg.get("ergodic.lr_initial", ts.schedule.initial);
  ts.schedule.final_rate = cfg.get("ergodic.lr_final", ts.schedule.final_rate);
  ts.schedule.iterations = cfg.get("ergodic.lr_decay_iterations", ts.iterations);
  ts.log_every = cfg.get("ergodic.log_every", ts.log_every);
  ts.seed = static_cast<std::uint64_t>(cfg.get("ergodic.seed", 0LL));
  ts.batch.Mx = cfg.get("ergodic.Mx", ts.batch.Mx);
  ts.validate_each_log = cfg.get("ergodic.validation", ts.validate_each_log);
  es.weights.hjb = cfg.get("ergodic.loss.hjb", es.weights.hjb);
  es.weights.kfp = cfg.get("ergodic.loss.kfp", es.weights.kfp);
  es.weights.norm = cfg.get("ergodic.loss.norm", es.weights.norm);
  es.weights.period = cfg.get("ergodic.loss.period", es.weights.period);
  es.tabulation_nodes = cfg.get("ergodic.nodes", es.tabulation_nodes);
  ts.validate();
  es.weights.validate();
  return es;
}

inline void save_ergodic(const std::string& path, const ErgodicSolution& s, std::uint64_t seed,
                         long long iterations) {
  nn::Checkpoint c;
  c.seed = seed;
  c.iteration = iterations;
  c.nets.push_back({"u", s.nets.u, {}});
  c.nets.push_back({"m", s.nets.m, {}});
  c.scalars["lambda"] = s.lambda;
  c.metadata["kind"] = "ergodic";
  c.metadata["nodes"] = s.x.size();
  nn::save_checkpoint(path, c);
}

inline ErgodicSolution load_ergodic(const std::string& path) {
  const nn::Checkpoint c = nn::load_checkpoint(path);
  if (c.metadata.value("kind", std::string()) != "ergodic" || !c.scalars.contains("lambda"))
    throw ConfigError("'" + path + "' is not an ergodic checkpoint");
  NetPair nets{c.net("u").net, c.net("m").net};
  return tabulate_ergodic(nets, c.scalars.at("lambda"), c.metadata.value("nodes", 1001));
}

}  // namespace mfg::dgm
