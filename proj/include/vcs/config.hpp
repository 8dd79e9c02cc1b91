#ifndef VCS_CONFIG_HPP
#define VCS_CONFIG_HPP

#include <string>

#include <json.hpp>

#include "vcs/eval.hpp"
#include "vcs/iql.hpp"
#include "vcs/policy.hpp"

namespace vcs {

// Dataset generation settings for the gen-data command.
struct DataConfig {
  std::string quality = "expert";
  int n_traj = 50;
  double mixture_ratio = 0.25;
  std::uint64_t seed = 0;
};

// Quantization settings shared by the omrr / profile commands.
struct NtkConfig {
  int bins = 25;
  long n_pairs = 1000;
  double action_lo = -1.0;
  double action_hi = 1.0;
  std::uint64_t seed = 0;
  Vec profile_state;       // required by `profile`
  Vec profile_ref_action;  // required by `profile`
};

// State binning for the spread command.
struct SpreadConfig {
  int bins_per_dim = 20;
  double state_lo = -1.0;
  double state_hi = 1.0;
};

// One JSON document drives every subcommand; sections are optional and
// default-initialized, unknown keys are rejected anywhere in the tree.
struct RunConfig {
  std::string env_id;
  std::string out_dir;
  DataConfig data;
  IqlConfig iql;
  VcsConfig vcs;
  EvalConfig eval;
  NtkConfig ntk;
  SpreadConfig spread;
  Vec goal;  // subgoal-mode evaluation target
};

RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

nlohmann::json to_json(const DataConfig& cfg);
nlohmann::json to_json(const IqlConfig& cfg);
nlohmann::json to_json(const VcsConfig& cfg);
nlohmann::json to_json(const EvalConfig& cfg);
nlohmann::json to_json(const NtkConfig& cfg);
nlohmann::json to_json(const SpreadConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace vcs

#endif  // VCS_CONFIG_HPP
