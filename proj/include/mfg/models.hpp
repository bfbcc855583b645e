#pragma once

// The two built-in model families: a local-coupling game on the unit torus and a
// linear-quadratic game with mean-field interaction through the population mean.

#include <cmath>
#include <variant>

#include "mfg/common.hpp"
#include "mfg/config.hpp"

namespace mfg {

/// F(x, m) = gamma m + U(x), G(x) = psi sin(2 pi (x + 1/4)), Gaussian m0, on the torus.
struct LocalCouplingModel {
  double gamma = 1.0;
  double potential_amplitude = 50.0;
  double c1 = 0.1;
  double c2 = 1.0;
  double c3 = 0.1;
  double psi = 1.0;
  double mu0 = 0.5;
  double sigma0 = 0.2;
  double T = 5.0;

  // The residual losses hard-code the 1/2 Laplacian, so the viscosity is not configurable.
  static constexpr double kappa = 0.5;

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("local model: gamma must be > 0");
    if (!(sigma0 > 0.0)) throw ConfigError("local model: sigma0 must be > 0");
    if (!(T > 0.0)) throw ConfigError("local model: T must be > 0");
  }

  Domain domain() const { return Domain::torus(); }

  double potential(double x) const {
    return potential_amplitude * (c1 * std::cos(2.0 * pi * x) + c2 * std::cos(4.0 * pi * x) +
                                  c3 * std::sin(2.0 * pi * (x - pi / 8.0)));
  }

  /// Normalizer of the Gaussian kernel on [0,1] (closed form via erf).
  double m0_mass() const {
    const double s = sigma0 * std::sqrt(2.0);
    return sigma0 * std::sqrt(pi / 2.0) * (std::erf((1.0 - mu0) / s) - std::erf(-mu0 / s));
  }
};

inline double eval_F_local(const LocalCouplingModel& model, double x, double m_val) {
  return model.gamma * m_val + model.potential(x);
}

inline double eval_G_local(const LocalCouplingModel& model, double x) {
  return model.psi * std::sin(2.0 * pi * (x + 0.25));
}

inline double eval_m0(const LocalCouplingModel& model, double x) {
  const double d = x - model.mu0;
  return std::exp(-d * d / (2.0 * model.sigma0 * model.sigma0)) / model.m0_mass();
}

/// Running cost 1/2 (Q x^2 + B (x - mean)^2 + a^2), terminal cost Psi (x - r)^2, dX = -a dt + sigma dW.
struct LQModel {
  double Q = 2.0;
  double B = 2.0;
  double Psi = 1.0;
  double r = 1.0;
  double sigma = 1.0;
  double T = 10.0;
  double L = 3.0;
  double mu0 = 1.0;
  double sigma0 = 0.2;

  void validate() const {
    if (!(Q > 0.0)) throw ConfigError("lq model: Q must be > 0");
    if (!(B >= 0.0)) throw ConfigError("lq model: B must be >= 0");
    if (!(Psi > 0.0)) throw ConfigError("lq model: Psi must be > 0");
    if (!(sigma > 0.0)) throw ConfigError("lq model: sigma must be > 0");
    if (!(T > 0.0) || !(L > 0.0)) throw ConfigError("lq model: T and L must be > 0");
    if (!(sigma0 > 0.0)) throw ConfigError("lq model: sigma0 must be > 0");
  }

  Domain domain() const { return Domain::interval(L); }

  double C() const { return Q + B; }
  double sqrtC() const { return std::sqrt(C()); }
  double gamma_ric() const { return 2.0 * Psi; }
  double omega() const { return std::sqrt(C() - B); }
  double nu() const { return 0.5 * sigma * sigma; }

  // Ergodic coefficients of F[m](x) = q x^2 + beta x mean + gamma_erg mean^2.
  double q() const { return 0.5 * (Q + B); }
  double beta() const { return -B; }
  double gamma_erg() const { return 0.5 * B; }
  double s() const { return 1.0 / std::sqrt(2.0 * q()); }

  /// Closed-form (mu, chi) trajectories exist only when sqrt(C) equals 2 Psi.
  bool semi_explicit() const { return std::abs(sqrtC() - gamma_ric()) <= 1e-12 * sqrtC(); }

  double m0(double x) const {
    const double d = x - mu0;
    return std::exp(-d * d / (2.0 * sigma0 * sigma0)) / (sigma0 * std::sqrt(2.0 * pi));
  }
  double terminal(double x) const { return Psi * (x - r) * (x - r); }
  // Coefficients of the terminal cost Psi x^2 - 2 Psi r x + Psi r^2 in the quadratic ansatz.
  double chi_terminal() const { return -2.0 * Psi * r; }
  double psi_terminal() const { return Psi * r * r; }
};

struct LQCosts {
  double running;
  double terminal;
};

inline LQCosts lq_costs(const LQModel& model, double x, double a, double mean) {
  const double dx = x - mean;
  return {0.5 * (model.Q * x * x + model.B * dx * dx + a * a),
          model.Psi * (x - model.r) * (x - model.r)};
}

/// Ergodic-form coupling q x^2 + beta x mean + gamma_erg mean^2.
inline double lq_ergodic_coupling(const LQModel& model, double x, double mean) {
  return model.q() * x * x + model.beta() * x * mean + model.gamma_erg() * mean * mean;
}

using Model = std::variant<LocalCouplingModel, LQModel>;

inline LocalCouplingModel local_model_from_config(const Config& cfg) {
  LocalCouplingModel m;
  m.gamma = cfg.get("model.gamma", m.gamma);
  m.potential_amplitude = cfg.get("model.potential_amplitude", m.potential_amplitude);
  m.c1 = cfg.get("model.c1", m.c1);
  m.c2 = cfg.get("model.c2", m.c2);
  m.c3 = cfg.get("model.c3", m.c3);
  m.psi = cfg.get("model.psi", m.psi);
  m.mu0 = cfg.get("model.mu0", m.mu0);
  m.sigma0 = cfg.get("model.sigma0", m.sigma0);
  m.T = cfg.get("model.T", m.T);
  m.validate();
  return m;
}

inline LQModel lq_model_from_config(const Config& cfg) {
  LQModel m;
  m.Q = cfg.get("model.Q", m.Q);
  m.B = cfg.get("model.B", m.B);
  m.Psi = cfg.get("model.Psi", m.Psi);
  m.r = cfg.get("model.r", m.r);
  m.sigma = cfg.get("model.sigma", m.sigma);
  m.T = cfg.get("model.T", m.T);
  m.L = cfg.get("model.L", m.L);
  m.mu0 = cfg.get("model.mu0", m.mu0);
  m.sigma0 = cfg.get("model.sigma0", m.sigma0);
  m.validate();
  return m;
}

/// Reads `model.type` (local | lq) and the matching parameters.
inline Model model_from_config(const Config& cfg, const std::string& fallback_type = "local") {
  const std::string type = cfg.get("model.type", fallback_type);
  if (type == "local") return local_model_from_config(cfg);
  if (type == "lq") return lq_model_from_config(cfg);
  throw ConfigError("model.type must be 'local' or 'lq', got '" + type + "'");
}

}  // namespace mfg
