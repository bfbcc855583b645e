#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfg::nn {

/// Learning rate decaying linearly from `initial` to `final_rate` over `iterations`
/// steps, then held at `final_rate`.
struct LinearDecay {
  double initial = 1e-2;
  double final_rate = 1e-5;
  long long iterations = 300000;

  double rate(long long step) const {
    if (iterations <= 0) return final_rate;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(iterations));
    return (1.0 - frac) * initial + frac * final_rate;
  }
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  LinearDecay schedule;
  long long step = 0;  // completed updates
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  AdamState() = default;
  AdamState(Eigen::Index size, LinearDecay sched)
      : schedule(sched), m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}

  double current_rate() const { return schedule.rate(step); }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params,
                      const Eigen::Ref<const Eigen::VectorXd>& grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  const double lr = state.current_rate();
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

}  // namespace mfg::nn
