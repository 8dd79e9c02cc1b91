// Generates the committed score registry: reference returns that anchor
// normalized scores at 0 (uniform-random policy) and 100 (scripted expert).
#include <cstdio>
#include <string>

#include "vcs/envs.hpp"
#include "vcs/eval.hpp"

namespace {

double stitch_random_mean(int episodes, std::uint64_t seed) {
  vcs::Rng rng(seed);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    vcs::stitch::State s = vcs::stitch::reset();
    double ret = 0.0;
    for (int t = 0; t < vcs::stitch::kHorizon; ++t) {
      const auto& avail = vcs::stitch::available_actions(s);
      vcs::stitch::Action a = avail[rng.randint(avail.size())];
      vcs::stitch::Step out = vcs::stitch::step(s, a);
      ret += out.reward;
      if (out.done) break;
      s = out.next;
    }
    total += ret;
  }
  return total / episodes;
}

double reach_mean(int episodes, std::uint64_t seed, bool random_policy) {
  auto env = vcs::make_env("reach2d");
  vcs::Rng rng(seed);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    vcs::Vec state = env->reset(rng);
    double ret = 0.0;
    for (int t = 0; t < env->horizon(); ++t) {
      vcs::Vec a;
      if (random_policy) {
        a = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      } else {
        a = vcs::reach::expert_action(state);
      }
      auto out = env->step(a);
      ret += out.reward;
      state = out.state;
      if (out.done) break;
    }
    total += ret;
  }
  return total / episodes;
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_path = argc > 1 ? argv[1] : "data/score_registry.json";
  const int episodes = 1000;

  vcs::ScoreRegistry reg;
  vcs::ScoreRef stitch;
  stitch.random_score = stitch_random_mean(episodes, 0);
  stitch.expert_score = vcs::stitch::kOptimalReturn;
  stitch.provenance =
      "make_registry: random = uniform over available actions, 1000 episodes, "
      "seed 0; expert = optimal return (exact)";
  reg.refs["stitch-grid"] = stitch;

  vcs::ScoreRef reach;
  reach.random_score = reach_mean(episodes, 0, true);
  reach.expert_score = reach_mean(episodes, 1, false);
  reach.provenance =
      "make_registry: random = uniform actions in [-1,1]^2, 1000 episodes, "
      "seed 0; expert = noiseless scripted controller, 1000 episodes, seed 1";
  reg.refs["reach2d"] = reach;

  vcs::save_registry(out_path, reg);
  std::printf("stitch-grid: random %.6f expert %.6f\n", stitch.random_score,
              stitch.expert_score);
  std::printf("reach2d:     random %.6f expert %.6f\n", reach.random_score,
              reach.expert_score);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}
