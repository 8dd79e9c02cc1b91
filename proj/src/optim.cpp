#include "vcs/optim.hpp"

#include <cmath>

namespace vcs {

AdamState adam_init(std::size_t n_params) {
  AdamState s;
  s.m.assign(n_params, 0.0);
  s.v.assign(n_params, 0.0);
  return s;
}

void adam_step(ParamSet& params, const Vec& grad, AdamState& state, double lr,
               double weight_decay) {
  std::size_t n = params.values.size();
  if (grad.size() != n || state.m.size() != n || state.v.size() != n)
    throw DimensionError("adam_step: size mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw DivergenceError("non-finite gradient in adam_step", state.step_count);

  if (weight_decay != 0.0) {
    double scale = 1.0 - lr * weight_decay;
    for (double& p : params.values) p *= scale;
  }

  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double bc1 = 1.0 - std::pow(state.beta1, t);
  double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params.values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void polyak_update(ParamSet& target, const ParamSet& online, double chi) {
  if (target.values.size() != online.values.size())
    throw DimensionError("polyak_update: size mismatch");
  for (std::size_t i = 0; i < target.values.size(); ++i)
    target.values[i] = chi * online.values[i] + (1.0 - chi) * target.values[i];
}

}  // namespace vcs
