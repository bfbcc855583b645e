// mfg: command-line driver for the ergodic DGM, finite-horizon DGM (with or without the
// turnpike penalty), the finite-difference solver, the LQ closed form, and comparisons.
//
// Exit codes: 0 success, 2 solver failure, 3 configuration error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "mfg/mfg.hpp"
#include "mfg/harness/runs.hpp"

namespace fs = std::filesystem;
using namespace mfg;
using nlohmann::json;
using Eigen::MatrixXd;

namespace {

struct Common {
  std::string config_path, out = "out";
  std::optional<long long> seed;
  std::optional<int> grid_nt, grid_nx;
  std::string grid;  // "NTxNX"
};

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "overrides train.seed / ergodic.seed");
  app->add_option("--grid-nt", c.grid_nt, "evaluation grid time nodes");
  app->add_option("--grid-nx", c.grid_nx, "evaluation grid space nodes");
  app->add_option("--grid", c.grid, "evaluation grid as NTxNX");
}

Config load_config(const Common& c) { return c.config_path.empty() ? Config{} : Config::load(c.config_path); }

harness::EvalGrid pick_grid(const Common& c, const Config& cfg, harness::EvalGrid g) {
  g.nt = cfg.get("grid.nt", g.nt);
  g.nx = cfg.get("grid.nx", g.nx);
  if (!c.grid.empty()) {
    const auto x = c.grid.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument(c.grid);
      g.nt = std::stoi(c.grid.substr(0, x));
      g.nx = std::stoi(c.grid.substr(x + 1));
    } catch (const std::exception&) {
      throw ConfigError("--grid expects NTxNX, got '" + c.grid + "'");
    }
  }
  if (c.grid_nt) g.nt = *c.grid_nt;
  if (c.grid_nx) g.nx = *c.grid_nx;
  g.validate();
  return g;
}

harness::Provenance prov(const std::string& solver, const std::string& field, const Config& cfg,
                         std::uint64_t seed) {
  return {solver, field, harness::config_hash(cfg), seed, json::object()};
}

void write_run(const fs::path& out, const Config& cfg, json summary) {
  summary["config_hash"] = harness::config_hash(cfg);
  harness::write_text(out / "config.cfg", cfg.canonical());
  harness::write_text(out / "run.json", summary.dump(2) + "\n");
}

void export_fields(const fs::path& out, const harness::Fields& f, const std::string& solver,
                   const Config& cfg, std::uint64_t seed) {
  harness::export_field(out / "u", f.grid, f.u, prov(solver, "u", cfg, seed));
  harness::export_field(out / "m", f.grid, f.m, prov(solver, "m", cfg, seed));
}

std::string series_csv(const std::string& header, const std::vector<std::vector<double>>& cols) {
  std::string s = header + "\n";
  for (std::size_t i = 0; i < cols.front().size(); ++i) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      s += (c ? "," : "") + harness::format17(cols[c][i]);
    s += "\n";
  }
  return s;
}

void set_seed(Config& cfg, const Common& c, const std::string& key) {
  if (c.seed) cfg.set(key, std::to_string(*c.seed));
}

// ---- subcommands ----------------------------------------------------------------------

int ergodic_cmd(const Common& c) {
  Config cfg = load_config(c);
  set_seed(cfg, c, "ergodic.seed");
  const Model model = model_from_config(cfg, "local");
  if (!std::holds_alternative<LocalCouplingModel>(model))
    throw ConfigError("ergodic-train supports the local model only");
  const auto& lm = std::get<LocalCouplingModel>(model);
  const dgm::ErgodicSettings es = dgm::ergodic_settings_from_config(cfg);
  cfg.check_all_used({"train", "batch", "loss", "tpk", "fdm", "grid"});
  const fs::path out(c.out);
  fs::create_directories(out);

  const dgm::ErgodicReport r = dgm::ergodic_train(lm, es, [](const dgm::ErgodicRecord& rec) {
    std::fprintf(stderr, "iter %lld  lambda %.6g  total %.6g\n", rec.iter, rec.lambda, rec.train.total);
  });
  const dgm::ErgodicSolution& s = r.solution;
  harness::write_text(out / "loss.csv", dgm::ergodic_log_csv(r.records));
  dgm::save_ergodic((out / "ergodic.ckpt").string(), s, es.train.seed, es.train.iterations);
  harness::write_text(out / "profile.csv", series_csv("x,ubar,mbar", {s.x, s.ubar, s.mbar}));
  json j{{"command", "ergodic-train"}, {"lambda", s.lambda}, {"min_mbar", s.min_mbar},
         {"mass", s.grid_mean(s.mbar)}, {"seed", es.train.seed}, {"wall_seconds", r.wall_seconds}};
  if (s.min_mbar > 0.0) j["omega_local"] = dgm::rate_local(s, lm.gamma);
  write_run(out, cfg, j);
  std::printf("lambda %.10g  min mbar %.6g\n", s.lambda, s.min_mbar);
  return 0;
}

int dgm_cmd(const Common& c, const std::string& model_flag, const std::string& tp_flag,
            const std::string& ergodic_dir) {
  Config cfg = load_config(c);
  if (!model_flag.empty()) cfg.set("model.type", model_flag);
  set_seed(cfg, c, "train.seed");
  const Model model = model_from_config(cfg, "local");
  const bool lq = std::holds_alternative<LQModel>(model);
  std::optional<dgm::TurnpikeMode> mode;
  if (!tp_flag.empty()) mode = dgm::turnpike_mode_from_string(tp_flag);
  const fs::path out(c.out);
  fs::create_directories(out);

  std::optional<dgm::ErgodicSolution> erg;
  const bool need_erg = !lq && dgm::turnpike_from_config(cfg, lq, mode).active();  // validates first
  if (need_erg) {
    const dgm::ErgodicSettings es = dgm::ergodic_settings_from_config(cfg);
    if (!ergodic_dir.empty()) {
      erg = dgm::load_ergodic((fs::path(ergodic_dir) / "ergodic.ckpt").string());
    } else {
      std::fprintf(stderr, "training the ergodic target first\n");
      erg = dgm::ergodic_train(std::get<LocalCouplingModel>(model), es).solution;
      dgm::save_ergodic((out / "ergodic.ckpt").string(), *erg, es.train.seed, es.train.iterations);
    }
  }
  const dgm::LossSetup setup = harness::finite_setup(cfg, model, mode, erg ? &*erg : nullptr);
  const dgm::TrainSettings ts = dgm::train_settings_from_config(cfg, lq);
  const harness::EvalGrid g = pick_grid(c, cfg, harness::default_grid(setup.problem));
  cfg.check_all_used({"ergodic", "fdm"});

  dgm::TrainHooks hooks;
  hooks.checkpoint_dir = out.string();
  hooks.on_log = [](const dgm::LogRecord& r) {
    std::fprintf(stderr, "iter %lld  lr %.3g  total %.6g  val %.6g\n", r.iter, r.lr, r.train.total,
                 r.validation.total);
  };
  const dgm::TrainReport rep = dgm::train(setup, ts, hooks);
  harness::write_text(out / "loss.csv", dgm::loss_log_csv(rep.records));
  const std::string solver = std::string("dgm-") + dgm::to_string(setup.turnpike.mode);
  export_fields(out, harness::tabulate_dgm(rep.nets, g), solver, cfg, ts.seed);

  json j{{"command", "dgm-train"},
         {"model", lq ? "lq" : "local"},
         {"turnpike", dgm::to_string(setup.turnpike.mode)},
         {"seed", ts.seed},
         {"iterations", ts.iterations},
         {"wall_seconds", rep.wall_seconds},
         {"final_total", rep.records.back().train.total},
         {"grid", {{"nt", g.nt}, {"nx", g.nx}}}};
  if (setup.turnpike.active()) j["omega"] = setup.target.omega;
  if (lq) {
    const harness::LqScore sc = harness::score_lq(rep.nets, setup.problem.lq_model(), g);
    harness::write_text(out / "mu.csv", series_csv("t,mu,mu_exact", {sc.t, sc.mu, sc.mu_exact}));
    j["rel_l2"] = {{"mu", sc.mu_rel_l2}, {"u", sc.u_rel_l2}, {"m", sc.m_rel_l2},
                   {"definition", "||A-B||_2 / ||B||_2 over grid nodes"}};
    std::printf("relative L2 error: mu %.4e  u %.4e  m %.4e\n", sc.mu_rel_l2, sc.u_rel_l2, sc.m_rel_l2);
  }
  write_run(out, cfg, j);
  return 0;
}

int fdm_cmd(const Common& c) {
  Config cfg = load_config(c);
  const Model model = model_from_config(cfg, "local");
  if (!std::holds_alternative<LocalCouplingModel>(model))
    throw ConfigError("fdm-solve supports the periodic local model only");
  const auto& lm = std::get<LocalCouplingModel>(model);
  const fdm::FdmGrid fg(cfg.get("fdm.NT", 200), cfg.get("fdm.Nh", 200), lm.T);
  fdm::FixedPointOptions opt;
  opt.max_iterations = cfg.get("fdm.max_iterations", opt.max_iterations);
  opt.tol = cfg.get("fdm.tol", opt.tol);
  const double damping = cfg.get("fdm.damping", 0.5);
  if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("fdm.damping must lie in [0, 1)");
  opt.damping = [damping](int) { return damping; };
  const harness::EvalGrid native(fg.NT + 1, fg.Nh + 1, lm.T, 0.0, 1.0);
  const harness::EvalGrid g = pick_grid(c, cfg, native);
  cfg.check_all_used({"train", "batch", "loss", "tpk", "ergodic"});
  const fs::path out(c.out);
  fs::create_directories(out);

  const auto start = std::chrono::steady_clock::now();
  const fdm::DiscreteSolution s = fdm::fixed_point_solve(fdm::local_problem(lm), fg, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  export_fields(out, harness::tabulate_fdm(s, g), "fdm", cfg, 0);
  std::vector<double> it(s.history.size());
  for (std::size_t k = 0; k < it.size(); ++k) it[k] = double(k);
  if (!s.history.empty()) harness::write_text(out / "fixed_point.csv", series_csv("iteration,distance", {it, s.history}));
  write_run(out, cfg,
            {{"command", "fdm-solve"}, {"NT", fg.NT}, {"Nh", fg.Nh}, {"iterations", s.iterations},
             {"converged", s.converged}, {"stagnated", s.stagnated}, {"mass_drift", s.mass_drift()},
             {"min_density", s.min_density()}, {"wall_seconds", wall}});
  std::printf("fixed point: %d iterations, converged %s, mass drift %.3e, min M %.3e\n", s.iterations,
              s.converged ? "yes" : "no", s.mass_drift(), s.min_density());
  if (!s.converged) {
    std::fprintf(stderr, "fdm-solve: fixed point did not converge (%s)\n",
                 s.stagnated ? "stagnated" : "iteration cap reached");
    return 2;
  }
  return 0;
}

int lq_cmd(const Common& c) {
  Config cfg = load_config(c);
  cfg.set("model.type", cfg.get("model.type", std::string("lq")));
  const Model model = model_from_config(cfg, "lq");
  if (!std::holds_alternative<LQModel>(model)) throw ConfigError("lq-analytic needs model.type = lq");
  const auto& m = std::get<LQModel>(model);
  const harness::EvalGrid g = pick_grid(c, cfg, harness::EvalGrid(2000, 2000, m.T, m.domain()));
  cfg.check_all_used({"train", "batch", "loss", "tpk", "ergodic", "fdm"});
  const fs::path out(c.out);
  fs::create_directories(out);

  const lq::LQFiniteSolution s = lq::solve_finite(m, g.nt);
  export_fields(out, harness::tabulate_lq(s, g), "lq-analytic", cfg, 0);
  harness::write_text(out / "mu.csv", series_csv("t,phi,chi,psi,mu,var", {s.t, s.phi, s.chi, s.psi, s.mu, s.var}));
  const lq::LQErgodicSolution e = lq::lq_ergodic(m);
  write_run(out, cfg,
            {{"command", "lq-analytic"}, {"c", s.c}, {"omega", m.omega()}, {"lambda", e.lambda},
             {"mu_bar", e.mu_bar}, {"mu_T", s.mu.back()}});
  std::printf("c = %.12g  mu(T) = %.12g\n", s.c, s.mu.back());
  return 0;
}

struct Loaded {
  harness::ImportedField u, m;
};

Loaded load_run(const fs::path& dir) { return {harness::import_field(dir / "u"), harness::import_field(dir / "m")}; }

int compare_cmd(const Common& c, const std::string& a_dir, const std::string& b_dir) {
  const Loaded A = load_run(a_dir), B = load_run(b_dir);
  Config none;
  harness::EvalGrid g = pick_grid(c, none, B.u.grid);
  auto on_grid = [&](const harness::ImportedField& f) { return harness::resample(f.grid, f.values, g); };
  const MatrixXd au = on_grid(A.u), am = on_grid(A.m), bu = on_grid(B.u), bm = on_grid(B.m);
  const fs::path out(c.out);
  fs::create_directories(out);
  harness::Provenance p{"compare", "", "", 0, {{"a", a_dir}, {"b", b_dir}, {"eps_rel", harness::eps_rel}}};
  p.field = "u_relerr";
  harness::export_field(out / "u_relerr", g, harness::rel_error_map(au, bu), p);
  p.field = "m_relerr";
  harness::export_field(out / "m_relerr", g, harness::rel_error_map(am, bm), p);
  json j{{"command", "compare"},
         {"a", {{"dir", a_dir}, {"u", A.u.meta}, {"m", A.m.meta}}},
         {"b", {{"dir", b_dir}, {"u", B.u.meta}, {"m", B.m.meta}}},
         {"grid", {{"nt", g.nt}, {"nx", g.nx}}},
         {"definition", "l2: ||A-B||_2 / ||B||_2 over grid nodes; map: |A-B| / (|B| + 1e-8)"},
         {"rel_l2", {{"u", harness::rel_error_l2(au, bu)}, {"m", harness::rel_error_l2(am, bm)}}}};
  if (g.lo < 0.0) {
    const auto mua = harness::lq_mean_curve(am, g), mub = harness::lq_mean_curve(bm, g);
    j["rel_l2"]["mu"] = harness::rel_error_l2(mua, mub);
  }
  harness::write_text(out / "report.json", j.dump(2) + "\n");
  std::printf("%s\n", j["rel_l2"].dump().c_str());
  return 0;
}

int curves_cmd(const Common& c, const std::string& run_dir, const std::string& ergodic_dir) {
  const Loaded L = load_run(run_dir);
  if (!L.u.grid.same_nodes(L.m.grid)) throw ConfigError("curves: u and m grids differ");
  harness::Fields f{L.u.grid, L.u.values, L.m.values};
  const harness::EvalGrid& g = f.grid;
  std::vector<double> ub(g.nx), mb(g.nx);
  std::vector<std::vector<double>> cols;
  std::string header = "t,m_l2,m_l1,u_l2,u_l1";
  if (g.lo < 0.0) {
    // Interval domain: LQ model, ergodic targets in closed form.
    const Config cfg = Config::load((fs::path(run_dir) / "config.cfg").string());
    const LQModel m = lq_model_from_config(cfg);
    const lq::LQErgodicSolution e = lq::lq_ergodic(m);
    for (int j = 0; j < g.nx; ++j) ub[j] = 0.5 * m.sqrtC() * g.x(j) * g.x(j), mb[j] = e.m(g.x(j));
  } else {
    if (ergodic_dir.empty()) throw ConfigError("curves on the torus need --ergodic DIR");
    const dgm::ErgodicSolution e = dgm::load_ergodic((fs::path(ergodic_dir) / "ergodic.ckpt").string());
    for (int j = 0; j < g.nx; ++j) ub[j] = e.ubar_at(g.x(j)), mb[j] = e.mbar_at(g.x(j));
  }
  const harness::TurnpikeCurves tc = harness::turnpike_curves(f, ub, mb);
  cols = {tc.t, tc.m_l2, tc.m_l1, tc.u_l2, tc.u_l1};
  if (g.lo < 0.0) {
    header += ",mu";
    cols.push_back(harness::lq_mean_curve(f.m, g));
  }
  const fs::path out(c.out);
  fs::create_directories(out);
  harness::write_text(out / "curves.csv", series_csv(header, cols));
  const int mid = (g.nt - 1) / 2;
  std::printf("||m - mbar||: t=0 %.4e  t=T/2 %.4e  t=T %.4e\n", tc.m_l2.front(), tc.m_l2[mid], tc.m_l2.back());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean field game solvers: DGM, turnpike-accelerated DGM, finite differences"};
  app.require_subcommand(1);
  Common c;

  auto* erg = app.add_subcommand("ergodic-train", "train the stationary (ergodic) system on the torus");
  add_common(erg, c);

  std::string model_flag, tp_flag, ergodic_dir, a_dir, b_dir, run_dir;
  auto* dgm_sc = app.add_subcommand("dgm-train", "finite-horizon DGM, optionally turnpike-accelerated");
  add_common(dgm_sc, c);
  dgm_sc->add_option("--model", model_flag, "local | lq")->check(CLI::IsMember({"local", "lq"}));
  dgm_sc->add_option("--turnpike", tp_flag, "none | u | du")->check(CLI::IsMember({"none", "u", "du"}));
  dgm_sc->add_option("--ergodic", ergodic_dir, "directory of an ergodic-train run (local model)");

  auto* fdm_sc = app.add_subcommand("fdm-solve", "finite-difference solver on the torus");
  add_common(fdm_sc, c);
  auto* lq_sc = app.add_subcommand("lq-analytic", "closed-form LQ solution");
  add_common(lq_sc, c);

  auto* cmp = app.add_subcommand("compare", "relative errors of run A against reference run B");
  add_common(cmp, c, false);
  cmp->add_option("A", a_dir)->required();
  cmp->add_option("B", b_dir)->required();

  auto* cur = app.add_subcommand("curves", "turnpike distance curves of a run");
  add_common(cur, c, false);
  cur->add_option("RUN", run_dir)->required();
  cur->add_option("--ergodic", ergodic_dir, "directory of an ergodic-train run (torus runs)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (*erg) return ergodic_cmd(c);
    if (*dgm_sc) return dgm_cmd(c, model_flag, tp_flag, ergodic_dir);
    if (*fdm_sc) return fdm_cmd(c);
    if (*lq_sc) return lq_cmd(c);
    if (*cmp) return compare_cmd(c, a_dir, b_dir);
    if (*cur) return curves_cmd(c, run_dir, ergodic_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 3;
}
