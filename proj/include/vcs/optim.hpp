#ifndef VCS_OPTIM_HPP
#define VCS_OPTIM_HPP

#include "vcs/net.hpp"

namespace vcs {

// Bias-corrected Adam with decoupled weight decay (decay scales the
// parameters before the moment update and is not part of the gradient).
struct AdamState {
  Vec m;
  Vec v;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState adam_init(std::size_t n_params);

// One update in place. Throws DivergenceError if any gradient entry is
// non-finite; params and moments are left untouched in that case.
void adam_step(ParamSet& params, const Vec& grad, AdamState& state, double lr,
               double weight_decay = 0.0);

// Linear warmup to base_lr over warmup_steps, constant afterwards.
struct LrSchedule {
  double base_lr = 3e-4;
  long warmup_steps = 0;

  double lr(long step) const {
    if (warmup_steps <= 0) return base_lr;
    double ramp = static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    return base_lr * (ramp < 1.0 ? ramp : 1.0);
  }
};

// target <- chi * online + (1 - chi) * target, elementwise.
void polyak_update(ParamSet& target, const ParamSet& online, double chi);

}  // namespace vcs

#endif  // VCS_OPTIM_HPP
