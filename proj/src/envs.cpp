#include "vcs/envs.hpp"

#include <algorithm>
#include <cmath>

namespace vcs {

namespace stitch {

namespace {

struct Edge {
  Action action;
  State next;
  double reward;
};

// Canonical transition table. The purple trajectory (s1-R-s3-UL-s2-R) returns
// 6, the orange one (s1-U-s2-DR-s6-R) returns 5; taking UP at s1 and then
// RIGHT at s2 stitches them into the optimal return 7.
const std::vector<Edge>& edges(State s) {
  static const std::vector<Edge> s1 = {{Action::Up, State::S2, 3.0},
                                       {Action::Right, State::S3, 1.0}};
  static const std::vector<Edge> s2 = {{Action::Right, State::Term, 4.0},
                                       {Action::DownRight, State::S6, 1.0}};
  static const std::vector<Edge> s3 = {{Action::UpLeft, State::S2, 1.0}};
  static const std::vector<Edge> s6 = {{Action::Right, State::Term, 1.0}};
  static const std::vector<Edge> none = {};
  switch (s) {
    case State::S1: return s1;
    case State::S2: return s2;
    case State::S3: return s3;
    case State::S6: return s6;
    case State::Term: return none;
  }
  return none;
}

const char* state_name(State s) {
  switch (s) {
    case State::S1: return "s1";
    case State::S2: return "s2";
    case State::S3: return "s3";
    case State::S6: return "s6";
    case State::Term: return "term";
  }
  return "?";
}

}  // namespace

State reset() { return State::S1; }

Step step(State state, Action action) {
  for (const Edge& e : edges(state)) {
    if (e.action == action)
      return Step{e.next, e.reward, e.next == State::Term};
  }
  throw InvalidActionError(std::string("action not available in state ") +
                           state_name(state));
}

const std::vector<Action>& available_actions(State state) {
  static std::vector<std::vector<Action>> table = [] {
    std::vector<std::vector<Action>> t(5);
    for (State s : {State::S1, State::S2, State::S3, State::S6, State::Term}) {
      std::vector<Action> acts;
      for (const Edge& e : edges(s)) acts.push_back(e.action);
      t[state_index(s)] = acts;
    }
    return t;
  }();
  return table[state_index(state)];
}

int state_index(State s) {
  switch (s) {
    case State::S1: return 0;
    case State::S2: return 1;
    case State::S3: return 2;
    case State::S6: return 3;
    case State::Term: return 4;
  }
  return -1;
}

int action_index(Action a) {
  switch (a) {
    case Action::Up: return 0;
    case Action::Right: return 1;
    case Action::UpLeft: return 2;
    case Action::DownRight: return 3;
  }
  return -1;
}

Vec encode_state(State s) {
  Vec v(kStateDim, 0.0);
  v[state_index(s)] = 1.0;
  return v;
}

Vec encode_action(Action a) {
  Vec v(kActionDim, 0.0);
  v[action_index(a)] = 1.0;
  return v;
}

namespace {

Trajectory roll_fixture(const std::vector<Action>& plan) {
  Trajectory traj;
  State s = reset();
  traj.states.push_back(encode_state(s));
  for (Action a : plan) {
    Step out = step(s, a);
    traj.actions.push_back(encode_action(a));
    traj.rewards.push_back(out.reward);
    traj.states.push_back(encode_state(out.next));
    s = out.next;
    if (out.done) break;
  }
  traj.terminal = (s == State::Term);
  return traj;
}

}  // namespace

Dataset dataset() {
  Dataset data;
  data.state_dim = kStateDim;
  data.action_dim = kActionDim;
  data.r_star = kOptimalReturn;
  data.meta["env"] = "stitch-grid";
  data.trajectories.push_back(
      roll_fixture({Action::Right, Action::UpLeft, Action::Right}));  // return 6
  data.trajectories.push_back(
      roll_fixture({Action::Up, Action::DownRight, Action::Right}));  // return 5
  return data;
}

}  // namespace stitch

namespace reach {

Vec sample_start(Rng& rng) {
  double theta = rng.uniform(0.0, 2.0 * M_PI);
  double radius = rng.uniform(0.8, 1.0);
  return {radius * std::cos(theta), radius * std::sin(theta)};
}

Vec dynamics(const Vec& p, const Vec& a) {
  Vec next(2);
  for (int d = 0; d < 2; ++d)
    next[d] = std::clamp(p[d] + kStep * a[d], -1.0, 1.0);
  return next;
}

double reward(const Vec& p_next) { return -l2_norm(p_next); }

Vec expert_action(const Vec& p) {
  double n = std::max(l2_norm(p), 0.1);
  return {-p[0] / n, -p[1] / n};
}

}  // namespace reach

std::string quality_name(Quality q) {
  switch (q) {
    case Quality::Expert: return "expert";
    case Quality::Medium: return "medium";
    case Quality::Mixture: return "mixture";
  }
  return "?";
}

Quality quality_from_name(const std::string& name) {
  if (name == "expert") return Quality::Expert;
  if (name == "medium") return Quality::Medium;
  if (name == "mixture") return Quality::Mixture;
  throw ConfigError("unknown dataset quality: " + name);
}

BehaviorPolicy BehaviorPolicy::expert() { return {Quality::Expert, 0.05, 0.0}; }
BehaviorPolicy BehaviorPolicy::medium() { return {Quality::Medium, 0.4, 0.0}; }
BehaviorPolicy BehaviorPolicy::mixture(double expert_ratio) {
  return {Quality::Mixture, 0.0, expert_ratio};
}

Dataset reach_dataset(const BehaviorPolicy& behavior, int n_traj, std::uint64_t seed) {
  if (n_traj < 1) throw ConfigError("need at least one trajectory");
  Dataset data;
  data.state_dim = reach::kStateDim;
  data.action_dim = reach::kActionDim;
  data.meta["env"] = "reach2d";
  data.meta["quality"] = quality_name(behavior.quality);
  data.meta["n_traj"] = std::to_string(n_traj);
  data.meta["seed"] = std::to_string(seed);

  int n_expert = 0;
  double expert_sigma = BehaviorPolicy::expert().noise_scale;
  double medium_sigma = BehaviorPolicy::medium().noise_scale;
  switch (behavior.quality) {
    case Quality::Expert: n_expert = n_traj; break;
    case Quality::Medium: n_expert = 0; break;
    case Quality::Mixture:
      n_expert = static_cast<int>(std::lround(behavior.mixture_ratio * n_traj));
      data.meta["mixture_ratio"] = std::to_string(behavior.mixture_ratio);
      break;
  }
  if (behavior.quality != Quality::Mixture && behavior.noise_scale >= 0.0) {
    if (behavior.quality == Quality::Expert) expert_sigma = behavior.noise_scale;
    if (behavior.quality == Quality::Medium) medium_sigma = behavior.noise_scale;
  }

  Rng rng(seed);
  for (int i = 0; i < n_traj; ++i) {
    double sigma = i < n_expert ? expert_sigma : medium_sigma;
    Trajectory traj;
    Vec p = reach::sample_start(rng);
    traj.states.push_back(p);
    for (int t = 0; t < reach::kHorizon; ++t) {
      Vec mean = reach::expert_action(p);
      Vec a(2);
      for (int d = 0; d < 2; ++d)
        a[d] = std::clamp(mean[d] + sigma * rng.normal(), -1.0, 1.0);
      Vec next = reach::dynamics(p, a);
      traj.actions.push_back(a);
      traj.rewards.push_back(reach::reward(next));
      traj.states.push_back(next);
      p = next;
    }
    traj.terminal = false;  // time-limited, not absorbing
    data.trajectories.push_back(std::move(traj));
  }
  data.r_star = data.max_return();
  return data;
}

// ---- episode adapters

namespace {

class StitchGridEnv final : public Env {
 public:
  std::string id() const override { return "stitch-grid"; }
  int state_dim() const override { return stitch::kStateDim; }
  int action_dim() const override { return stitch::kActionDim; }
  int horizon() const override { return stitch::kHorizon; }

  Vec reset(Rng&) override {
    state_ = stitch::reset();
    steps_ = 0;
    done_ = false;
    return stitch::encode_state(state_);
  }

  StepOut step(const Vec& action) override {
    if (done_) throw InvalidActionError("episode already finished");
    if (static_cast<int>(action.size()) != stitch::kActionDim)
      throw DimensionError("stitch-grid action dimension mismatch");
    int best = 0;
    for (int i = 1; i < stitch::kActionDim; ++i)
      if (action[i] > action[best]) best = i;
    static const stitch::Action order[4] = {
        stitch::Action::Up, stitch::Action::Right, stitch::Action::UpLeft,
        stitch::Action::DownRight};
    stitch::Step out = stitch::step(state_, order[best]);
    state_ = out.next;
    steps_ += 1;
    done_ = out.done || steps_ >= stitch::kHorizon;
    return StepOut{stitch::encode_state(state_), out.reward, done_};
  }

  Vec project_action(const Vec& raw) const override {
    if (static_cast<int>(raw.size()) != stitch::kActionDim)
      throw DimensionError("stitch-grid action dimension mismatch");
    const auto& avail = stitch::available_actions(state_);
    if (avail.empty()) throw InvalidActionError("no actions available");
    stitch::Action best = avail.front();
    double best_v = raw[stitch::action_index(best)];
    for (stitch::Action a : avail) {
      double v = raw[stitch::action_index(a)];
      if (v > best_v) {
        best = a;
        best_v = v;
      }
    }
    return stitch::encode_action(best);
  }

 private:
  stitch::State state_ = stitch::State::S1;
  int steps_ = 0;
  bool done_ = false;
};

class Reach2DEnv final : public Env {
 public:
  std::string id() const override { return "reach2d"; }
  int state_dim() const override { return reach::kStateDim; }
  int action_dim() const override { return reach::kActionDim; }
  int horizon() const override { return reach::kHorizon; }

  Vec reset(Rng& rng) override {
    p_ = reach::sample_start(rng);
    steps_ = 0;
    return p_;
  }

  StepOut step(const Vec& action) override {
    if (static_cast<int>(action.size()) != reach::kActionDim)
      throw DimensionError("reach2d action dimension mismatch");
    p_ = reach::dynamics(p_, action);
    steps_ += 1;
    return StepOut{p_, reach::reward(p_), steps_ >= reach::kHorizon};
  }

  Vec project_action(const Vec& raw) const override {
    if (static_cast<int>(raw.size()) != reach::kActionDim)
      throw DimensionError("reach2d action dimension mismatch");
    Vec a(raw.size());
    for (std::size_t d = 0; d < raw.size(); ++d)
      a[d] = std::clamp(raw[d], -1.0, 1.0);
    return a;
  }

 private:
  Vec p_ = {0.0, 0.0};
  int steps_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& id) {
  if (id == "stitch-grid") return std::make_unique<StitchGridEnv>();
  if (id == "reach2d") return std::make_unique<Reach2DEnv>();
  throw ConfigError("unknown environment id: " + id);
}

}  // namespace vcs
