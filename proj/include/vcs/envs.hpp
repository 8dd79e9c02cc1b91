#ifndef VCS_ENVS_HPP
#define VCS_ENVS_HPP

#include <memory>
#include <string>
#include <vector>

#include "vcs/dataset.hpp"

namespace vcs {

// ---- StitchGrid: a 5-state deterministic gridworld whose two logged
// trajectories overlap at one state, so the optimal return (7) is only
// reachable by stitching them. Horizon 3, undiscounted.

namespace stitch {

enum class State { S1, S2, S3, S6, Term };
enum class Action { Up, Right, UpLeft, DownRight };

constexpr int kHorizon = 3;
constexpr int kStateDim = 5;
constexpr int kActionDim = 4;
constexpr double kOptimalReturn = 7.0;

struct Step {
  State next;
  double reward;
  bool done;
};

State reset();
// Throws InvalidActionError when `action` is not available in `state`.
Step step(State state, Action action);
const std::vector<Action>& available_actions(State state);

Vec encode_state(State s);
Vec encode_action(Action a);
int state_index(State s);
int action_index(Action a);

// The two fixture trajectories (6 transitions total), r_star = 7.
Dataset dataset();

}  // namespace stitch

// ---- Reach2D: point mass on [-1,1]^2, a in [-1,1]^2, p' = clip(p + 0.1 a),
// reward -|p'|, horizon 30, start uniform on the ring |p| in [0.8, 1.0].

namespace reach {

constexpr int kHorizon = 30;
constexpr int kStateDim = 2;
constexpr int kActionDim = 2;
constexpr double kStep = 0.1;

Vec sample_start(Rng& rng);
Vec dynamics(const Vec& p, const Vec& a);   // clips the result to the box
double reward(const Vec& p_next);           // -l2(p_next)
Vec expert_action(const Vec& p);            // -p / max(|p|, 0.1)

}  // namespace reach

enum class Quality { Expert, Medium, Mixture };

std::string quality_name(Quality q);
Quality quality_from_name(const std::string& name);

// Scripted reach controller: expert mean plus Gaussian action noise,
// clipped to the action box. Expert sigma 0.05, medium sigma 0.4.
struct BehaviorPolicy {
  Quality quality = Quality::Expert;
  double noise_scale = 0.05;
  double mixture_ratio = 0.25;  // expert fraction for mixture datasets

  static BehaviorPolicy expert();
  static BehaviorPolicy medium();
  static BehaviorPolicy mixture(double expert_ratio);
};

// Rolls `n_traj` episodes of Reach2D under the given controller.
// Deterministic for a given seed; r_star = max trajectory return.
Dataset reach_dataset(const BehaviorPolicy& behavior, int n_traj, std::uint64_t seed);

// ---- uniform episode interface used by the eval harness

class Env {
 public:
  virtual ~Env() = default;
  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;

  virtual Vec reset(Rng& rng) = 0;

  struct StepOut {
    Vec state;
    double reward;
    bool done;
  };
  virtual StepOut step(const Vec& action) = 0;

  // Snap a raw policy output into the env's action set (argmax over the
  // currently available moves for StitchGrid, box clip for Reach2D).
  virtual Vec project_action(const Vec& raw) const = 0;
};

// Known ids: "stitch-grid", "reach2d". Throws ConfigError otherwise.
std::unique_ptr<Env> make_env(const std::string& id);

}  // namespace vcs

#endif  // VCS_ENVS_HPP
