#include "vcs/config.hpp"

#include <fstream>
#include <set>

namespace vcs {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object())
    throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

IqlConfig iql_from_json(const json& obj) {
  check_keys(obj,
             {"expectile", "discount", "target_rate", "lr", "weight_decay",
              "batch_size", "gradient_steps", "hidden", "seed"},
             "iql");
  IqlConfig cfg;
  maybe(obj, "expectile", cfg.expectile);
  maybe(obj, "discount", cfg.discount);
  maybe(obj, "target_rate", cfg.target_rate);
  maybe(obj, "lr", cfg.lr);
  maybe(obj, "weight_decay", cfg.weight_decay);
  maybe(obj, "batch_size", cfg.batch_size);
  maybe(obj, "gradient_steps", cfg.gradient_steps);
  maybe(obj, "hidden", cfg.hidden);
  maybe(obj, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

VcsConfig vcs_from_json(const json& obj) {
  check_keys(obj,
             {"context_len", "mode", "lambda", "weight_floor", "constant_weight",
              "gradient_steps", "lr", "warmup_steps", "batch_size", "weight_decay",
              "hidden", "rtg_multipliers", "checkpoint_interval", "aid_domain",
              "seed"},
             "vcs");
  VcsConfig cfg;
  maybe(obj, "context_len", cfg.context_len);
  if (obj.contains("mode")) cfg.mode = cond_mode_from_name(obj.at("mode").get<std::string>());
  maybe(obj, "lambda", cfg.lambda);
  maybe(obj, "weight_floor", cfg.weight_floor);
  maybe(obj, "constant_weight", cfg.constant_weight);
  maybe(obj, "gradient_steps", cfg.gradient_steps);
  maybe(obj, "lr", cfg.lr);
  maybe(obj, "warmup_steps", cfg.warmup_steps);
  maybe(obj, "batch_size", cfg.batch_size);
  maybe(obj, "weight_decay", cfg.weight_decay);
  maybe(obj, "hidden", cfg.hidden);
  maybe(obj, "rtg_multipliers", cfg.rtg_multipliers);
  maybe(obj, "checkpoint_interval", cfg.checkpoint_interval);
  if (obj.contains("aid_domain"))
    cfg.aid_domain = aid_domain_from_name(obj.at("aid_domain").get<std::string>());
  maybe(obj, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

DataConfig data_from_json(const json& obj) {
  check_keys(obj, {"quality", "n_traj", "mixture_ratio", "seed"}, "data");
  DataConfig cfg;
  maybe(obj, "quality", cfg.quality);
  maybe(obj, "n_traj", cfg.n_traj);
  maybe(obj, "mixture_ratio", cfg.mixture_ratio);
  maybe(obj, "seed", cfg.seed);
  if (cfg.n_traj < 1) throw ConfigError("data.n_traj must be >= 1");
  if (cfg.mixture_ratio < 0.0 || cfg.mixture_ratio > 1.0)
    throw ConfigError("data.mixture_ratio must lie in [0, 1]");
  quality_from_name(cfg.quality);  // reject unknown labels early
  return cfg;
}

NtkConfig ntk_from_json(const json& obj) {
  check_keys(obj,
             {"bins", "n_pairs", "action_lo", "action_hi", "seed",
              "profile_state", "profile_ref_action"},
             "ntk");
  NtkConfig cfg;
  maybe(obj, "bins", cfg.bins);
  maybe(obj, "n_pairs", cfg.n_pairs);
  maybe(obj, "action_lo", cfg.action_lo);
  maybe(obj, "action_hi", cfg.action_hi);
  maybe(obj, "seed", cfg.seed);
  maybe(obj, "profile_state", cfg.profile_state);
  maybe(obj, "profile_ref_action", cfg.profile_ref_action);
  if (cfg.bins < 1) throw ConfigError("ntk.bins must be >= 1");
  if (cfg.n_pairs < 1) throw ConfigError("ntk.n_pairs must be >= 1");
  if (cfg.action_lo >= cfg.action_hi)
    throw ConfigError("ntk.action_lo must be below ntk.action_hi");
  return cfg;
}

SpreadConfig spread_from_json(const json& obj) {
  check_keys(obj, {"bins_per_dim", "state_lo", "state_hi"}, "spread");
  SpreadConfig cfg;
  maybe(obj, "bins_per_dim", cfg.bins_per_dim);
  maybe(obj, "state_lo", cfg.state_lo);
  maybe(obj, "state_hi", cfg.state_hi);
  if (cfg.bins_per_dim < 1) throw ConfigError("spread.bins_per_dim must be >= 1");
  if (cfg.state_lo >= cfg.state_hi)
    throw ConfigError("spread.state_lo must be below spread.state_hi");
  return cfg;
}

EvalConfig eval_from_json(const json& obj, Vec* goal) {
  check_keys(obj,
             {"episodes_per_checkpoint", "checkpoint_interval", "running_window",
              "seeds", "rtg_multipliers", "goal"},
             "eval");
  EvalConfig cfg;
  maybe(obj, "episodes_per_checkpoint", cfg.episodes_per_checkpoint);
  maybe(obj, "checkpoint_interval", cfg.checkpoint_interval);
  maybe(obj, "running_window", cfg.running_window);
  maybe(obj, "seeds", cfg.seeds);
  maybe(obj, "rtg_multipliers", cfg.rtg_multipliers);
  if (goal && obj.contains("goal")) *goal = obj.at("goal").get<Vec>();
  cfg.validate();
  return cfg;
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc) {
  check_keys(doc, {"env", "out", "data", "iql", "vcs", "eval", "ntk", "spread"},
             "top level");
  RunConfig cfg;
  maybe(doc, "env", cfg.env_id);
  maybe(doc, "out", cfg.out_dir);
  if (doc.contains("data")) cfg.data = data_from_json(doc.at("data"));
  if (doc.contains("iql")) cfg.iql = iql_from_json(doc.at("iql"));
  if (doc.contains("vcs")) cfg.vcs = vcs_from_json(doc.at("vcs"));
  if (doc.contains("eval")) cfg.eval = eval_from_json(doc.at("eval"), &cfg.goal);
  if (doc.contains("ntk")) cfg.ntk = ntk_from_json(doc.at("ntk"));
  if (doc.contains("spread")) cfg.spread = spread_from_json(doc.at("spread"));
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  return run_config_from_json(doc);
}

nlohmann::json to_json(const DataConfig& cfg) {
  return {{"quality", cfg.quality},
          {"n_traj", cfg.n_traj},
          {"mixture_ratio", cfg.mixture_ratio},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const IqlConfig& cfg) {
  return {{"expectile", cfg.expectile},
          {"discount", cfg.discount},
          {"target_rate", cfg.target_rate},
          {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay},
          {"batch_size", cfg.batch_size},
          {"gradient_steps", cfg.gradient_steps},
          {"hidden", cfg.hidden},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const VcsConfig& cfg) {
  return {{"context_len", cfg.context_len},
          {"mode", cond_mode_name(cfg.mode)},
          {"lambda", cfg.lambda},
          {"weight_floor", cfg.weight_floor},
          {"constant_weight", cfg.constant_weight},
          {"gradient_steps", cfg.gradient_steps},
          {"lr", cfg.lr},
          {"warmup_steps", cfg.warmup_steps},
          {"batch_size", cfg.batch_size},
          {"weight_decay", cfg.weight_decay},
          {"hidden", cfg.hidden},
          {"rtg_multipliers", cfg.rtg_multipliers},
          {"checkpoint_interval", cfg.checkpoint_interval},
          {"aid_domain", aid_domain_name(cfg.aid_domain)},
          {"seed", cfg.seed}};
}

nlohmann::json to_json(const EvalConfig& cfg) {
  return {{"episodes_per_checkpoint", cfg.episodes_per_checkpoint},
          {"checkpoint_interval", cfg.checkpoint_interval},
          {"running_window", cfg.running_window},
          {"seeds", cfg.seeds},
          {"rtg_multipliers", cfg.rtg_multipliers}};
}

nlohmann::json to_json(const NtkConfig& cfg) {
  nlohmann::json doc = {{"bins", cfg.bins},
                        {"n_pairs", cfg.n_pairs},
                        {"action_lo", cfg.action_lo},
                        {"action_hi", cfg.action_hi},
                        {"seed", cfg.seed}};
  if (!cfg.profile_state.empty()) doc["profile_state"] = cfg.profile_state;
  if (!cfg.profile_ref_action.empty())
    doc["profile_ref_action"] = cfg.profile_ref_action;
  return doc;
}

nlohmann::json to_json(const SpreadConfig& cfg) {
  return {{"bins_per_dim", cfg.bins_per_dim},
          {"state_lo", cfg.state_lo},
          {"state_hi", cfg.state_hi}};
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json doc;
  if (!cfg.env_id.empty()) doc["env"] = cfg.env_id;
  if (!cfg.out_dir.empty()) doc["out"] = cfg.out_dir;
  doc["data"] = to_json(cfg.data);
  doc["iql"] = to_json(cfg.iql);
  doc["vcs"] = to_json(cfg.vcs);
  doc["eval"] = to_json(cfg.eval);
  if (!cfg.goal.empty()) doc["eval"]["goal"] = cfg.goal;
  doc["ntk"] = to_json(cfg.ntk);
  doc["spread"] = to_json(cfg.spread);
  return doc;
}

}  // namespace vcs
