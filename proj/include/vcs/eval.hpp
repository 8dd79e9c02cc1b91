#ifndef VCS_EVAL_HPP
#define VCS_EVAL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcs/envs.hpp"
#include "vcs/policy.hpp"

namespace vcs {

struct EvalConfig {
  int episodes_per_checkpoint = 10;
  long checkpoint_interval = 1000;
  int running_window = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<double> rtg_multipliers = {1.0, 2.0};

  void validate() const;
};

// Either the initial return-to-go (Rtg mode) or a goal state (Subgoal mode).
struct CondTarget {
  CondMode mode = CondMode::Rtg;
  double target_rtg = 0.0;
  Vec goal;
};

struct RolloutResult {
  double episode_return = 0.0;
  std::vector<Vec> visited;      // every visited state, initial included
  std::vector<double> rtg_trace; // conditioner value at each decision
};

// Greedy deterministic rollout. In Rtg mode the conditioner starts at the
// target and decreases by each observed reward.
RolloutResult rollout_policy(const ParamSet& policy, const PolicySpec& spec,
                             Env& env, const CondTarget& target,
                             std::uint64_t seed);

struct ScoreRef {
  double random_score = 0.0;
  double expert_score = 0.0;
  std::string provenance;
};

struct ScoreRegistry {
  std::map<std::string, ScoreRef> refs;

  const ScoreRef& at(const std::string& env_id) const;
};

ScoreRegistry load_registry(const std::string& path);
void save_registry(const std::string& path, const ScoreRegistry& reg);

// 100 * (raw - random) / (expert - random)
double normalized_score(double raw, const std::string& env_id,
                        const ScoreRegistry& reg);

struct EvalReport {
  std::string env_id;
  std::vector<double> multipliers;
  // curves[m][c] = mean normalized score (over seeds) at checkpoint c
  std::vector<std::vector<double>> curves;
  // per_seed_final[m][i] = last running-window average for seed i
  std::vector<std::vector<double>> per_seed_final;
  // final_per_multiplier[m] = mean over seeds of the last window average
  std::vector<double> final_per_multiplier;
  double best_final = 0.0;  // max over multipliers
  double base_target = 0.0;
  std::vector<std::vector<Vec>> sample_episodes;  // visited states, last checkpoint
};

// Sweeps checkpoints x multipliers x seeds. base_target scales the
// multipliers into initial RTG targets (ignored in Subgoal mode, where
// `goal` is used instead). Requires at least running_window checkpoints.
EvalReport evaluate_run(const std::vector<ParamSet>& checkpoints,
                        const PolicySpec& spec, Env& env, const EvalConfig& cfg,
                        const ScoreRegistry& reg, double base_target,
                        const Vec& goal = {});

std::string eval_report_json(const EvalReport& report);
void write_visited_csv(std::ostream& out, const std::vector<std::vector<Vec>>& episodes);
// Minimal SVG line plot of the per-multiplier score curves.
void write_curves_svg(std::ostream& out, const EvalReport& report);

}  // namespace vcs

#endif  // VCS_EVAL_HPP
