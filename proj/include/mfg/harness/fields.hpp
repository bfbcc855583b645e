#pragma once

// Solver-agnostic tables of (u, m) on uniform (t, x) grids, error measures between
// tables, turnpike distance curves, and the long-form CSV / JSON export.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mfg/dgm/finite.hpp"
#include "mfg/fdm/solver.hpp"
#include "mfg/lq/analytic.hpp"

namespace mfg::harness {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Uniform nt x nx nodes over [0, T] x [lo, hi], both endpoints included.
struct EvalGrid {
  int nt = 200, nx = 200;
  double T = 1.0, lo = 0.0, hi = 1.0;

  EvalGrid() = default;
  EvalGrid(int nt_, int nx_, double T_, double lo_, double hi_)
      : nt(nt_), nx(nx_), T(T_), lo(lo_), hi(hi_) {
    validate();
  }
  EvalGrid(int nt_, int nx_, double T_, const Domain& d)
      : EvalGrid(nt_, nx_, T_, d.lower(), d.upper()) {}

  void validate() const {
    if (nt < 2 || nx < 2) throw ConfigError("eval grid: need at least 2 nodes per axis");
    if (!(T > 0.0) || !(hi > lo)) throw ConfigError("eval grid: empty time or space range");
  }

  double t(int i) const { return i == nt - 1 ? T : T * i / (nt - 1); }
  double x(int j) const { return j == nx - 1 ? hi : lo + (hi - lo) * j / (nx - 1); }
  double dx() const { return (hi - lo) / (nx - 1); }
  double volume() const { return hi - lo; }

  bool same_nodes(const EvalGrid& o) const {
    return nt == o.nt && nx == o.nx && T == o.T && lo == o.lo && hi == o.hi;
  }
};

/// Row i is time node i, column j is space node j.
struct Fields {
  EvalGrid grid;
  MatrixXd u, m;
};

inline MatrixXd tabulate(const EvalGrid& g, const std::function<double(double, double)>& f) {
  MatrixXd out(g.nt, g.nx);
  parallel_for(static_cast<std::size_t>(g.nt), [&](std::size_t i) {
    const int r = static_cast<int>(i);
    for (int j = 0; j < g.nx; ++j) out(r, j) = f(g.t(r), g.x(j));
  });
  return out;
}

inline Fields tabulate_dgm(const dgm::NetPair& nets, const EvalGrid& g) {
  Fields f{g, MatrixXd(g.nt, g.nx), MatrixXd(g.nt, g.nx)};
  parallel_for(static_cast<std::size_t>(g.nt), [&](std::size_t i) {
    const int r = static_cast<int>(i);
    MatrixXd in(2, g.nx);
    for (int j = 0; j < g.nx; ++j) in(0, j) = g.t(r), in(1, j) = g.x(j);
    f.u.row(r) = nn::evaluate(nets.u, in, nn::JetOrder::value).jets.value.transpose();
    f.m.row(r) = nn::evaluate(nets.m, in, nn::JetOrder::value).jets.value.transpose();
  });
  return f;
}

/// Bilinear interpolation of the FDM node values. On the FDM's own grid this returns
/// the node values exactly.
inline double bilinear(const fdm::FdmGrid& fg, const MatrixXd& A, double t, double x) {
  const double st = std::clamp(t / fg.dt(), 0.0, double(fg.NT));
  const double sx = std::clamp(x / fg.h(), 0.0, double(fg.Nh));
  const int n = std::min(static_cast<int>(st), fg.NT - 1);
  const int i = std::min(static_cast<int>(sx), fg.Nh - 1);
  const double a = st - n, b = sx - i;
  auto lerp = [&](int row) {
    return b == 0.0 ? A(row, i) : (1.0 - b) * A(row, i) + b * A(row, i + 1);
  };
  return a == 0.0 ? lerp(n) : (1.0 - a) * lerp(n) + a * lerp(n + 1);
}

inline Fields tabulate_fdm(const fdm::DiscreteSolution& s, const EvalGrid& g) {
  if (g.lo != 0.0 || g.hi != 1.0) throw ConfigError("tabulate: FDM output lives on the torus [0,1]");
  if (g.T != s.grid.T) throw ConfigError("tabulate: grid horizon differs from the FDM horizon");
  const fdm::FdmGrid& fg = s.grid;
  Fields f{g, MatrixXd(g.nt, g.nx), MatrixXd(g.nt, g.nx)};
  const bool native = g.nt == fg.NT + 1 && g.nx == fg.Nh + 1;
  for (int r = 0; r < g.nt; ++r)
    for (int j = 0; j < g.nx; ++j) {
      if (native) {
        f.u(r, j) = s.U(r, j);
        f.m(r, j) = s.M(r, j);
      } else {
        f.u(r, j) = bilinear(fg, s.U, g.t(r), g.x(j));
        f.m(r, j) = bilinear(fg, s.M, g.t(r), g.x(j));
      }
    }
  return f;
}

inline Fields tabulate_lq(const lq::LQFiniteSolution& s, const EvalGrid& g) {
  if (g.T != s.model.T) throw ConfigError("tabulate: grid horizon differs from the LQ horizon");
  Fields f{g, MatrixXd(g.nt, g.nx), MatrixXd(g.nt, g.nx)};
  const bool aligned = s.size() == g.nt;
  for (int r = 0; r < g.nt; ++r)
    for (int j = 0; j < g.nx; ++j) {
      const double x = g.x(j);
      f.u(r, j) = aligned ? s.u(r, x) : s.u(g.t(r), x);
      f.m(r, j) = aligned ? s.m(r, x) : s.m(g.t(r), x);
    }
  return f;
}

/// Bilinear resampling between two grids over the same rectangle.
inline MatrixXd resample(const EvalGrid& from, const MatrixXd& A, const EvalGrid& to) {
  if (from.same_nodes(to)) return A;
  if (from.T != to.T || from.lo != to.lo || from.hi != to.hi)
    throw ConfigError("resample: grids cover different rectangles");
  MatrixXd out(to.nt, to.nx);
  for (int r = 0; r < to.nt; ++r) {
    const double st = std::clamp(to.t(r) / to.T * (from.nt - 1), 0.0, double(from.nt - 1));
    const int n = std::min(static_cast<int>(st), from.nt - 2);
    const double a = st - n;
    for (int j = 0; j < to.nx; ++j) {
      const double sx = std::clamp((to.x(j) - to.lo) / (to.hi - to.lo) * (from.nx - 1), 0.0,
                                   double(from.nx - 1));
      const int i = std::min(static_cast<int>(sx), from.nx - 2);
      const double b = sx - i;
      out(r, j) = (1 - a) * ((1 - b) * A(n, i) + b * A(n, i + 1)) +
                  a * ((1 - b) * A(n + 1, i) + b * A(n + 1, i + 1));
    }
  }
  return out;
}

inline constexpr double eps_rel = 1e-8;

inline void require_same_shape(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ConfigError("rel_error: shapes differ");
}

inline MatrixXd rel_error_map(const MatrixXd& A, const MatrixXd& B) {
  require_same_shape(A, B);
  return ((A - B).cwiseAbs().array() / (B.cwiseAbs().array() + eps_rel)).matrix();
}

inline double rel_error_l2(const MatrixXd& A, const MatrixXd& B) {
  require_same_shape(A, B);
  const double nb = B.norm();
  if (nb == 0.0) throw SolverError("rel_error: reference field is identically zero");
  return (A - B).norm() / nb;
}

inline double rel_error_l2(const std::vector<double>& a, const std::vector<double>& b) {
  return rel_error_l2(Eigen::Map<const MatrixXd>(a.data(), 1, Index(a.size())),
                      Eigen::Map<const MatrixXd>(b.data(), 1, Index(b.size())));
}

/// Trapezoid weights on the grid's x nodes.
inline VectorXd trapezoid_weights(const EvalGrid& g) {
  VectorXd w = VectorXd::Constant(g.nx, g.dx());
  w(0) *= 0.5;
  w(g.nx - 1) *= 0.5;
  return w;
}

struct TurnpikeCurves {
  std::vector<double> t, m_l2, m_l1, u_l2, u_l1;
};

/// Per time node: norms of m(t) - mbar and u(t) - <u(t)> - ubar, where <.> is the
/// spatial average. ubar is centred the same way, so adding constants to either side
/// changes nothing.
inline TurnpikeCurves turnpike_curves(const Fields& f, const std::vector<double>& ubar,
                                      const std::vector<double>& mbar) {
  const EvalGrid& g = f.grid;
  if (Index(ubar.size()) != g.nx || Index(mbar.size()) != g.nx)
    throw ConfigError("turnpike_curves: ergodic tabulation does not match the grid");
  const VectorXd w = trapezoid_weights(g);
  const double vol = g.volume();
  const VectorXd ub = Eigen::Map<const VectorXd>(ubar.data(), g.nx);
  const VectorXd mb = Eigen::Map<const VectorXd>(mbar.data(), g.nx);
  const VectorXd ub_c = ub.array() - w.dot(ub) / vol;
  TurnpikeCurves c;
  for (int r = 0; r < g.nt; ++r) {
    const VectorXd dm = f.m.row(r).transpose() - mb;
    const VectorXd ur = f.u.row(r).transpose();
    const VectorXd du = (ur.array() - w.dot(ur) / vol).matrix() - ub_c;
    c.t.push_back(g.t(r));
    c.m_l2.push_back(std::sqrt(w.dot(dm.cwiseAbs2())));
    c.m_l1.push_back(w.dot(dm.cwiseAbs()));
    c.u_l2.push_back(std::sqrt(w.dot(du.cwiseAbs2())));
    c.u_l1.push_back(w.dot(du.cwiseAbs()));
  }
  return c;
}

/// Trapezoid estimate of the mean position per time node.
inline std::vector<double> lq_mean_curve(const MatrixXd& m, const EvalGrid& g) {
  const VectorXd w = trapezoid_weights(g);
  VectorXd xw(g.nx);
  for (int j = 0; j < g.nx; ++j) xw(j) = w(j) * g.x(j);
  std::vector<double> mu(static_cast<std::size_t>(g.nt));
  for (int r = 0; r < g.nt; ++r) mu[r] = m.row(r).dot(xw);
  return mu;
}

// ---- export ---------------------------------------------------------------------------

inline std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string field_csv(const EvalGrid& g, const MatrixXd& A) {
  std::string out = "t,x,value\n";
  out.reserve(out.size() + std::size_t(g.nt) * g.nx * 60);
  for (int r = 0; r < g.nt; ++r)
    for (int j = 0; j < g.nx; ++j)
      out += format17(g.t(r)) + "," + format17(g.x(j)) + "," + format17(A(r, j)) + "\n";
  return out;
}

struct Provenance {
  std::string solver, field;
  std::string config_hash;  // hex FNV-1a of the canonical config
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string config_hash(const Config& cfg) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(cfg.canonical()));
  return buf;
}

inline nlohmann::json sidecar(const EvalGrid& g, const Provenance& p) {
  nlohmann::json j;
  j["grid"] = {{"nt", g.nt}, {"nx", g.nx}, {"T", g.T}, {"x_lo", g.lo}, {"x_hi", g.hi}};
  j["solver"] = p.solver;
  j["field"] = p.field;
  j["config_hash"] = p.config_hash;
  j["seed"] = p.seed;
  j["columns"] = {"t", "x", "value"};
  j["extra"] = p.extra;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Writes <stem>.csv and <stem>.json.
inline void export_field(const std::filesystem::path& stem, const EvalGrid& g, const MatrixXd& A,
                         const Provenance& p) {
  write_text(stem.string() + ".csv", field_csv(g, A));
  write_text(stem.string() + ".json", sidecar(g, p).dump(2) + "\n");
}

struct ImportedField {
  EvalGrid grid;
  MatrixXd values;
  nlohmann::json meta;
};

/// Reads a CSV/JSON pair written by export_field. Values round-trip exactly.
inline ImportedField import_field(const std::filesystem::path& stem) {
  ImportedField out;
  try {
    out.meta = nlohmann::json::parse(read_text(stem.string() + ".json"));
    const auto& gj = out.meta.at("grid");
    out.grid = EvalGrid(gj.at("nt").get<int>(), gj.at("nx").get<int>(), gj.at("T").get<double>(),
                        gj.at("x_lo").get<double>(), gj.at("x_hi").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad sidecar for '" + stem.string() + "': " + e.what());
  }
  const EvalGrid& g = out.grid;
  out.values.resize(g.nt, g.nx);
  std::istringstream in(read_text(stem.string() + ".csv"));
  std::string line;
  std::getline(in, line);
  if (line != "t,x,value") throw ConfigError("unexpected CSV header in '" + stem.string() + ".csv'");
  Index count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (count >= Index(g.nt) * g.nx) throw ConfigError("CSV has more rows than its grid");
    const auto c2 = line.rfind(',');
    out.values(count / g.nx, count % g.nx) = std::strtod(line.c_str() + c2 + 1, nullptr);
    ++count;
  }
  if (count != Index(g.nt) * g.nx) throw ConfigError("CSV row count does not match its grid");
  return out;
}

}  // namespace mfg::harness
