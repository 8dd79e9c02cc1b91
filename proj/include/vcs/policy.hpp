#ifndef VCS_POLICY_HPP
#define VCS_POLICY_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "vcs/dataset.hpp"
#include "vcs/iql.hpp"

namespace vcs {

enum class CondMode { Rtg, Subgoal };

std::string cond_mode_name(CondMode m);
CondMode cond_mode_from_name(const std::string& name);

// Deterministic MLP policy over a K-slot context window. The input is the
// flattened (conditioner, state) pairs followed by the K validity bits.
struct PolicySpec {
  int context_len = 1;  // K
  CondMode mode = CondMode::Rtg;
  std::vector<int> hidden = {64, 64};
  int state_dim = 0;
  int action_dim = 0;

  int cond_dim() const { return mode == CondMode::Rtg ? 1 : state_dim; }
  int input_width() const {
    return context_len * (cond_dim() + state_dim) + context_len;
  }
  NetSpec net_spec() const;
  void validate() const;
};

// w(R) = max(lambda * (r_star - R), floor); continuous and nonincreasing.
struct VcsWeightFn {
  double lambda = 1.0;
  double r_star = 0.0;
  double floor = 0.0;
};

double vcs_weight(double source_return, const VcsWeightFn& fn);

// Per-slot conditioning vectors for a window starting at step t.
// Rtg mode: the return-to-go of each slot. Subgoal mode: one state drawn
// uniformly from indices > t, broadcast across the window (the final step
// falls back to the last state of the trajectory).
std::vector<Vec> make_conditioner(CondMode mode, const Trajectory& traj, int t,
                                  int K, Rng& rng);

struct WindowSample {
  SubTrajectory sub;
  std::vector<Vec> cond;  // K entries, cond_dim each
  // Optional per-slot 0/1 masks over action coordinates for the Simplex aid
  // domain: the softmax runs over the marked coordinates only. Empty means
  // all coordinates take part.
  std::vector<Vec> aid_masks;
};

// One mask per dataset state: the union of one-hot actions logged at that
// state. Supplies aid_masks when maximizing over in-sample actions.
std::map<Vec, Vec> in_sample_action_masks(const Dataset& data);

// Input vector for predicting the action at window slot `upto`: slots after
// `upto` (and padding slots) are zeroed with mask 0.
Vec policy_input(const PolicySpec& spec, const WindowSample& sample, int upto);

// Dataset-level mean of min(Q1, Q2) over all in-sample state-action pairs.
double q_normalizer(const Dataset& data, const QEnsemble& critics);

struct LossResult {
  double loss = 0.0;
  Vec grad;           // wrt policy params
  double bc_term = 0.0;
  double aid_term = 0.0;
};

// Where the critic is queried in the value-aid term. Raw feeds the policy
// output straight in. Simplex feeds softmax(output) — the differentiable
// form of an argmax over a one-hot action set, which keeps the query inside
// the hull of in-sample actions (a pure Q climb on raw outputs otherwise
// drifts into regions the critic never saw). Box clips into [-1, 1].
enum class AidDomain { Raw, Simplex, Box };

std::string aid_domain_name(AidDomain d);
AidDomain aid_domain_from_name(const std::string& name);

// Batched VCS objective: mean over valid window steps of
//   |a - pi(tau)|^2 - (w(R)/q_norm) * min(Q1, Q2)(s, h(pi(tau)))
// where h is the aid-domain map. The critic only contributes through its
// action-input gradient; its parameters are never touched. include_bc =
// false drops the first term (the q-greedy baseline). Throws on a zero
// normalizer or non-finite loss.
LossResult vcs_loss(const ParamSet& policy, const PolicySpec& spec,
                    const std::vector<WindowSample>& batch,
                    const QEnsemble& critics, const VcsWeightFn& weight_fn,
                    double q_norm, bool include_bc = true,
                    AidDomain domain = AidDomain::Raw);

enum class PolicyObjective { Vcs, RcslOnly, QGreedy, ConstantW };

std::string objective_name(PolicyObjective o);
PolicyObjective objective_from_name(const std::string& name);

struct VcsConfig {
  int context_len = 1;
  CondMode mode = CondMode::Rtg;
  double lambda = 1.0;
  double weight_floor = 0.0;
  double constant_weight = 1.0;  // used by the ConstantW baseline
  long gradient_steps = 20000;
  double lr = 3e-4;
  long warmup_steps = 10000;
  int batch_size = 64;
  double weight_decay = 1e-4;
  std::vector<int> hidden = {64, 64};
  std::vector<double> rtg_multipliers = {1.0, 2.0};
  long checkpoint_interval = 1000;  // 0 disables checkpointing
  AidDomain aid_domain = AidDomain::Raw;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PolicyResult {
  PolicySpec spec;
  ParamSet policy;
  std::vector<double> loss_history;
  std::vector<ParamSet> checkpoints;  // includes the final parameters
  long checkpoint_interval = 0;
  double q_norm = 0.0;
};

// Gradient steps over sampled sub-trajectories with AdamW and linear
// warmup. The critic is frozen throughout. rcsl_only trains with w == 0,
// q_greedy without the BC term, constant_w with w == constant_weight.
PolicyResult train_policy(const Dataset& data, const QEnsemble& critics,
                          const VcsConfig& cfg, PolicyObjective objective);

// ---- snapshots: policy.vcsp, per-checkpoint files, manifest.json with the
// conditioning setup, weight function, r_star and the critic hash.

void save_policy(const std::string& dir, const PolicyResult& result,
                 const VcsConfig& cfg, PolicyObjective objective, double r_star,
                 const std::string& critic_hash);

struct LoadedPolicy {
  PolicySpec spec;
  ParamSet policy;
  std::vector<ParamSet> checkpoints;
  VcsConfig cfg;
  PolicyObjective objective = PolicyObjective::Vcs;
  double r_star = 0.0;
  std::string critic_hash;
};

LoadedPolicy load_policy(const std::string& dir);

}  // namespace vcs

#endif  // VCS_POLICY_HPP
