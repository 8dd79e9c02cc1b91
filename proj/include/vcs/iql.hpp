#ifndef VCS_IQL_HPP
#define VCS_IQL_HPP

#include <cstdint>
#include <vector>

#include "vcs/dataset.hpp"
#include "vcs/net.hpp"
#include "vcs/optim.hpp"

namespace vcs {

// Double critic with Polyak-averaged targets. The consumed value is always
// min(Q1, Q2); bootstrapping uses the min of the two target copies.
struct QEnsemble {
  NetSpec spec;  // input = state_dim + action_dim, output = 1
  ParamSet q1;
  ParamSet q2;
  ParamSet q1_target;
  ParamSet q2_target;

  double min_q(const Vec& state_action) const;
  double target_min_q(const Vec& state_action) const;
};

QEnsemble make_ensemble(int state_dim, int action_dim,
                        const std::vector<int>& hidden, std::uint64_t seed);

struct IqlConfig {
  double expectile = 0.7;    // 0.9 suits sparse-reward goal tasks
  double discount = 0.99;
  double target_rate = 5e-3; // Polyak chi
  double lr = 3e-4;
  double weight_decay = 0.0;
  int batch_size = 256;
  long gradient_steps = 10000;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

// Asymmetric squared loss: |eta - 1(u < 0)| * u^2.
double expectile_loss(double u, double eta);
// d/du of the above (0 at u = 0).
double expectile_loss_grad(double u, double eta);

// One dataset row in trainer-friendly layout.
struct Transition {
  Vec state;
  Vec state_action;  // concat(state, action)
  double reward = 0.0;
  Vec next_state;
  bool done = false;
};

std::vector<Transition> flatten_transitions(const Dataset& data);

// One Adam step of the value net toward the eta-expectile of
// min(Q1_target, Q2_target); critics held fixed. Returns the batch loss.
double v_step(ParamSet& v, const NetSpec& v_spec, const QEnsemble& critics,
              const std::vector<Transition>& transitions,
              const std::vector<std::size_t>& batch, double eta,
              AdamState& opt, double lr, double weight_decay = 0.0);

// One Adam step of both critics toward r + gamma * (1 - done) * V(s');
// the value net is held fixed. Returns the mean of the two batch losses.
double q_step(QEnsemble& critics, const ParamSet& v, const NetSpec& v_spec,
              const std::vector<Transition>& transitions,
              const std::vector<std::size_t>& batch, double gamma,
              AdamState& opt1, AdamState& opt2, double lr,
              double weight_decay = 0.0);

struct IqlResult {
  QEnsemble critics;
  NetSpec v_spec;
  ParamSet v;
  std::vector<double> v_loss_history;
  std::vector<double> q_loss_history;
};

// gradient_steps iterations of {v_step; q_step; Polyak both targets}.
IqlResult train_iql(const Dataset& data, const IqlConfig& cfg);

// ---- snapshots: one VCSP file per network plus manifest.json carrying the
// training configuration and the hash of the dataset it was fit on.

void save_iql(const std::string& dir, const IqlResult& result,
              const IqlConfig& cfg, const std::string& dataset_hash);

struct LoadedIql {
  QEnsemble critics;
  NetSpec v_spec;
  ParamSet v;
  IqlConfig cfg;
  std::string dataset_hash;
};

LoadedIql load_iql(const std::string& dir);

}  // namespace vcs

#endif  // VCS_IQL_HPP
