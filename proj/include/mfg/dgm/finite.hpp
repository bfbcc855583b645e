#pragma once

// Baseline and turnpike-accelerated DGM training for the finite-horizon system.

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfg/config.hpp"
#include "mfg/dgm/losses.hpp"
#include "mfg/dgm/turnpike.hpp"
#include "mfg/nn/adam.hpp"
#include "mfg/nn/checkpoint.hpp"

namespace mfg::dgm {

struct LossWeights {
  double hjb = 50.0;
  double kfp = 1.0;
  double init = 100.0;
  double term = 600.0;
  double norm = 50.0;
  double period = 25.0;
  bool norm_u = true;  // include |mean u| in the normalization term

  static LossWeights local() { return {}; }
  static LossWeights lq() { return {100.0, 10.0, 100.0, 600.0, 50.0, 0.0, true}; }

  void validate() const {
    for (double c : {hjb, kfp, init, term, norm, period})
      if (!(c >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
};

struct TurnpikeSettings {
  TurnpikeMode mode = TurnpikeMode::none;
  double Cu = 0.0;  // u-form or Du-form weight
  double Cm = 0.0;
  double delta = 0.0;
  std::optional<double> omega_override;

  static TurnpikeSettings local() { return {TurnpikeMode::u, 10.0, 100.0, 0.1, {}}; }
  static TurnpikeSettings lq(TurnpikeMode mode) { return {mode, 1.0, 0.1, 0.2, {}}; }

  bool active() const { return mode != TurnpikeMode::none; }

  void validate(bool lq_model) const {
    if (!(Cu >= 0.0) || !(Cm >= 0.0)) throw ConfigError("turnpike weights must be >= 0");
    turnpike_window(1.0, delta);
    if (mode == TurnpikeMode::du && !lq_model)
      throw ConfigError("turnpike mode 'du' is only defined for the lq model");
    if (omega_override && !(*omega_override > 0.0)) throw ConfigError("tpk.omega_override must be > 0");
  }
};

struct LossComponents {
  static constexpr std::array<const char*, 8> names = {"hjb",  "kfp",    "init",  "term",
                                                       "norm", "period", "tpk_u", "tpk_m"};
  std::array<double, 8> v{};
  double total = 0.0;

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

struct LossSetup {
  FiniteProblem problem;
  LossWeights weights;
  TurnpikeSettings turnpike;
  TurnpikeTarget target;  // read only when the turnpike mode is active

  bool needs_origin() const { return problem.lq() && turnpike.mode == TurnpikeMode::u; }
};

/// Weighted sum of all loss terms on one evaluated batch. With `grad` set, the weighted
/// adjoints are written into `e` for a following accumulate().
inline LossComponents total_loss(const LossSetup& s, FiniteEval& e, bool grad) {
  const LossWeights& w = s.weights;
  auto c = [grad](double weight) { return grad ? weight : 0.0; };
  LossComponents out;
  out[0] = loss_hjb(s.problem, e, c(w.hjb));
  out[1] = loss_kfp(s.problem, e, c(w.kfp));
  out[2] = loss_init(s.problem, e, c(w.init));
  out[3] = loss_term(s.problem, e, c(w.term));
  out[4] = loss_norm(s.problem, e, c(w.norm), w.norm_u);
  out[5] = loss_period(e, c(w.period));

  const TurnpikeSettings& tp = s.turnpike;
  if (tp.active()) {
    if (s.problem.lq()) {
      out[6] = tp.mode == TurnpikeMode::u
                   ? penalty_u_lq(s.problem, s.target, tp.delta, e, c(tp.Cu))
                   : penalty_du_lq(s.problem, s.target, tp.delta, e, c(tp.Cu));
      out[7] = penalty_mu_lq(s.problem, s.target, tp.delta, e, c(tp.Cm));
    } else {
      out[6] = penalty_u_local(s.problem, s.target, tp.delta, e, c(tp.Cu));
      out[7] = penalty_m_local(s.problem, s.target, tp.delta, e, c(tp.Cm));
    }
  }
  // Fixed summation order: baseline terms first, so zero turnpike weights add exact zeros.
  out.total = w.hjb * out[0] + w.kfp * out[1] + w.init * out[2] + w.term * out[3] +
              w.norm * out[4] + w.period * out[5];
  if (tp.active()) out.total = out.total + tp.Cu * out[6] + tp.Cm * out[7];
  return out;
}

struct TrainSettings {
  std::vector<int> hidden = {100, 100};
  BatchSpec batch;
  long long iterations = 300000;
  nn::LinearDecay schedule{1e-2, 1e-5, 300000};
  int log_every = 1000;
  std::uint64_t seed = 0;
  bool validate_each_log = true;

  void validate() const {
    batch.validate();
    if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
    if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
    if (hidden.empty()) throw ConfigError("train.hidden must list at least one layer");
    for (int h : hidden)
      if (h < 1) throw ConfigError("train.hidden widths must be >= 1");
  }
};

struct LogRecord {
  long long iter = 0;
  double lr = 0.0;
  LossComponents train;
  LossComponents validation;
};

struct TrainReport {
  std::vector<LogRecord> records;
  NetPair nets;
  nn::AdamState adam_u, adam_m;
  double wall_seconds = 0.0;
  std::vector<std::string> checkpoints;
};

struct TrainHooks {
  std::function<void(const LogRecord&)> on_log;
  std::string checkpoint_dir;  // empty: no checkpoint files
};

inline Batch draw_finite_batch(const FiniteProblem& pb, BatchSpec spec, Rng& rng) {
  spec.T = pb.T();
  spec.domain = pb.domain();
  return draw_batch(spec, rng);
}

inline nn::Checkpoint make_checkpoint(const TrainReport& r, std::uint64_t seed, long long iter) {
  nn::Checkpoint c;
  c.seed = seed;
  c.iteration = iter;
  c.nets.push_back({"u", r.nets.u, r.adam_u});
  c.nets.push_back({"m", r.nets.m, r.adam_m});
  return c;
}

/// Algorithm: sample batch, evaluate losses and exact gradients, one Adam step per net.
inline TrainReport train(const LossSetup& setup, const TrainSettings& ts,
                         const TrainHooks& hooks = {}) {
  ts.validate();
  setup.weights.validate();
  setup.turnpike.validate(setup.problem.lq());
  const auto start = std::chrono::steady_clock::now();

  Rng init_rng = make_rng(ts.seed, 0);
  Rng train_rng = make_rng(ts.seed, 1);
  Rng val_rng = make_rng(ts.seed, 2);

  TrainReport rep;
  rep.nets = init_nets(ts.hidden, init_rng);
  rep.adam_u = nn::AdamState(rep.nets.u.num_params(), ts.schedule);
  rep.adam_m = nn::AdamState(rep.nets.m.num_params(), ts.schedule);
  const bool origin = setup.needs_origin();
  const double T = setup.problem.T();

  auto validation = [&] {
    if (!ts.validate_each_log) return LossComponents{};
    const Batch vb = draw_finite_batch(setup.problem, ts.batch, val_rng);
    FiniteEval ve = evaluate_batch(rep.nets, vb, T, origin);
    return total_loss(setup, ve, false);
  };

  for (long long it = 0; it < ts.iterations; ++it) {
    const Batch b = draw_finite_batch(setup.problem, ts.batch, train_rng);
    FiniteEval e = evaluate_batch(rep.nets, b, T, origin);
    const LossComponents lc = total_loss(setup, e, true);
    if (!std::isfinite(lc.total))
      throw DivergenceError("dgm training diverged at iteration " + std::to_string(it));
    if (it % ts.log_every == 0) {
      LogRecord rec{it, rep.adam_u.current_rate(), lc, validation()};
      rep.records.push_back(rec);
      if (hooks.on_log) hooks.on_log(rec);
    }
    VectorXd gu = VectorXd::Zero(rep.nets.u.num_params());
    VectorXd gm = VectorXd::Zero(rep.nets.m.num_params());
    accumulate(rep.nets, e, gu, gm);
    if (!gu.allFinite() || !gm.allFinite())
      throw DivergenceError("dgm training diverged at iteration " + std::to_string(it) +
                            " (non-finite gradient)");
    nn::adam_step(rep.adam_u, rep.nets.u.params(), gu);
    nn::adam_step(rep.adam_m, rep.nets.m.params(), gm);
  }
  {
    // Closing record: losses of the trained nets, no update.
    const Batch b = draw_finite_batch(setup.problem, ts.batch, train_rng);
    FiniteEval e = evaluate_batch(rep.nets, b, T, origin);
    LogRecord rec{ts.iterations, rep.adam_u.current_rate(), total_loss(setup, e, false),
                  validation()};
    if (!std::isfinite(rec.train.total)) throw DivergenceError("dgm training diverged (non-finite loss)");
    rep.records.push_back(rec);
    if (hooks.on_log) hooks.on_log(rec);
  }

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!hooks.checkpoint_dir.empty()) {
    const std::string path = hooks.checkpoint_dir + "/final.ckpt";
    nn::save_checkpoint(path, make_checkpoint(rep, ts.seed, ts.iterations));
    rep.checkpoints.push_back(path);
  }
  return rep;
}

/// iter, every component, total, validation total; 17 significant digits.
inline std::string loss_log_csv(const std::vector<LogRecord>& records) {
  std::string out = "iter";
  for (const char* n : LossComponents::names) out += std::string(",") + n;
  out += ",total,val_total\n";
  char buf[64];
  for (const auto& r : records) {
    out += std::to_string(r.iter);
    for (double v : r.train.v) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", r.train.total, r.validation.total);
    out += buf;
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

/// Reads loss.*, tpk.*, train.* and batch.* keys on top of the model defaults.
inline LossWeights loss_weights_from_config(const Config& cfg, bool lq_model) {
  LossWeights w = lq_model ? LossWeights::lq() : LossWeights::local();
  w.hjb = cfg.get("loss.hjb", w.hjb);
  w.kfp = cfg.get("loss.kfp", w.kfp);
  w.init = cfg.get("loss.init", w.init);
  w.term = cfg.get("loss.term", w.term);
  w.norm = cfg.get("loss.norm", w.norm);
  w.period = cfg.get("loss.period", w.period);
  w.norm_u = cfg.get("loss.norm_u", w.norm_u);
  w.validate();
  return w;
}

inline TurnpikeSettings turnpike_from_config(const Config& cfg, bool lq_model,
                                             std::optional<TurnpikeMode> mode_override) {
  const TurnpikeMode mode =
      mode_override ? *mode_override
                    : turnpike_mode_from_string(cfg.get("tpk.mode", std::string("none")));
  if (mode_override) cfg.get("tpk.mode", std::string("none"));  // CLI flag wins; mark as read
  TurnpikeSettings t;
  if (mode != TurnpikeMode::none)
    t = lq_model ? TurnpikeSettings::lq(mode) : TurnpikeSettings::local();
  t.mode = mode;
  t.Cu = cfg.get("tpk.Cu", t.Cu);
  t.Cm = cfg.get("tpk.Cm", t.Cm);
  t.delta = cfg.get("tpk.delta", t.delta);
  if (cfg.has("tpk.omega_override")) t.omega_override = cfg.get("tpk.omega_override", 0.0);
  t.validate(lq_model);
  return t;
}

inline std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("train.hidden: expected comma-separated widths, got '" + s + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline TrainSettings train_settings_from_config(const Config& cfg, bool lq_model) {
  TrainSettings ts;
  if (lq_model) ts.schedule = {1e-2, 1e-6, 400000};
  ts.hidden = parse_widths(cfg.get("train.hidden", std::string("100,100")));
  ts.iterations = cfg.get("train.iterations", lq_model ? 400000LL : 300000LL);
  ts.schedule.initial = cfg.get("train.lr_initial", ts.schedule.initial);
  ts.schedule.final_rate = cfg.get("train.lr_final", ts.schedule.final_rate);
  ts.schedule.iterations = cfg.get("train.lr_decay_iterations", ts.iterations);
  ts.log_every = cfg.get("train.log_every", ts.log_every);
  ts.seed = static_cast<std::uint64_t>(cfg.get("train.seed", 0LL));
  ts.validate_each_log = cfg.get("train.validation", ts.validate_each_log);
  ts.batch.Mt = cfg.get("batch.Mt", ts.batch.Mt);
  ts.batch.Mx = cfg.get("batch.Mx", ts.batch.Mx);
  ts.batch.Mb = cfg.get("batch.Mb", ts.batch.Mb);
  ts.batch.beta_a = cfg.get("batch.beta_a", ts.batch.beta_a);
  ts.batch.beta_b = cfg.get("batch.beta_b", ts.batch.beta_b);
  ts.validate();
  return ts;
}

}  // namespace mfg::dgm
