// vcslab: command-line front end for the offline-RL laboratory.
//
// Subcommands: gen-data, train-value, train-policy, eval, omrr, profile,
// spread, stitch-demo. Numeric settings come from a JSON config file; flags
// only pick the subcommand, file paths and seeds. Every run writes a
// resolved-config copy plus the hashes of its inputs beside its artifacts.
//
// Exit codes: 0 success, 2 config error, 3 divergence, 4 IO error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcs/config.hpp"
#include "vcs/demo.hpp"
#include "vcs/envs.hpp"
#include "vcs/eval.hpp"
#include "vcs/iql.hpp"
#include "vcs/ntk.hpp"
#include "vcs/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

vcs::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return vcs::RunConfig{};
  return vcs::load_run_config(path);
}

std::string require_out(const CommonArgs& args, const vcs::RunConfig& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  throw vcs::ConfigError("no output directory: pass --out or set \"out\" in the config");
}

json input_entry(const std::string& path) {
  return {{"path", path}, {"fnv1a64", vcs::hex64(vcs::fnv1a64_file(path))}};
}

// Content hash of a directory of artifacts: hash of the concatenated
// (name, file-hash) pairs of its regular files, in sorted order.
std::string dir_hash(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  std::string acc;
  for (const auto& name : names) {
    acc += name;
    acc += vcs::hex64(vcs::fnv1a64_file((fs::path(dir) / name).string()));
  }
  return vcs::hex64(vcs::fnv1a64(acc.data(), acc.size()));
}

// The provenance record every command leaves beside its artifacts.
void write_run_record(const std::string& dir, const std::string& command,
                      const json& resolved_config, const json& inputs,
                      const json& outputs) {
  fs::create_directories(dir);
  json doc;
  doc["command"] = command;
  doc["config"] = resolved_config;
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  std::ofstream out(fs::path(dir) / "config.json");
  if (!out) throw vcs::IoError("cannot write run record in " + dir);
  out << doc.dump(2) << "\n";
}

void write_loss_csv(const std::string& path, const std::vector<double>& a,
                    const std::vector<double>& b, const char* header) {
  std::ofstream out(path);
  if (!out) throw vcs::IoError("cannot write " + path);
  out << header << "\n";
  out.precision(17);
  std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    if (i < a.size()) out << "," << a[i];
    if (i < b.size()) out << "," << b[i];
    out << "\n";
  }
}

std::string critic_content_hash(const vcs::QEnsemble& critics) {
  std::string acc = vcs::hex64(vcs::param_hash(critics.q1)) +
                    vcs::hex64(vcs::param_hash(critics.q2));
  return vcs::hex64(vcs::fnv1a64(acc.data(), acc.size()));
}

vcs::Dataset generate_dataset(const std::string& env_id, const vcs::DataConfig& cfg) {
  if (env_id == "stitch-grid") return vcs::stitch::dataset();
  if (env_id == "reach2d") {
    vcs::Quality q = vcs::quality_from_name(cfg.quality);
    vcs::BehaviorPolicy behavior;
    switch (q) {
      case vcs::Quality::Expert: behavior = vcs::BehaviorPolicy::expert(); break;
      case vcs::Quality::Medium: behavior = vcs::BehaviorPolicy::medium(); break;
      case vcs::Quality::Mixture:
        behavior = vcs::BehaviorPolicy::mixture(cfg.mixture_ratio);
        break;
    }
    return vcs::reach_dataset(behavior, cfg.n_traj, cfg.seed);
  }
  throw vcs::ConfigError("unknown environment id: " + env_id);
}

int cmd_gen_data(const CommonArgs& args, const std::string& env_flag) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (!env_flag.empty()) cfg.env_id = env_flag;
  if (cfg.env_id.empty())
    throw vcs::ConfigError("gen-data needs an environment: --env or config \"env\"");
  if (args.seed) cfg.data.seed = *args.seed;
  std::string out = require_out(args, cfg);

  vcs::Dataset data = generate_dataset(cfg.env_id, cfg.data);
  fs::create_directories(out);
  std::string file = (fs::path(out) / "data.vcsd").string();
  vcs::save_dataset(file, data);

  json outputs;
  outputs["data.vcsd"] = input_entry(file);
  outputs["n_trajectories"] = data.trajectories.size();
  outputs["transitions"] = data.transition_count();
  outputs["r_star"] = data.r_star;
  json resolved = {{"env", cfg.env_id}, {"data", vcs::to_json(cfg.data)}};
  write_run_record(out, "gen-data", resolved, json::object(), outputs);
  std::cout << "wrote " << file << " (" << data.trajectories.size()
            << " trajectories, " << data.transition_count() << " transitions)\n";
  return 0;
}

int cmd_train_value(const CommonArgs& args, const std::string& data_path) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (args.seed) cfg.iql.seed = *args.seed;
  std::string out = require_out(args, cfg);

  vcs::Dataset data = vcs::load_dataset(data_path);
  vcs::IqlResult result = vcs::train_iql(data, cfg.iql);
  std::string data_hash = vcs::hex64(vcs::fnv1a64_file(data_path));
  vcs::save_iql(out, result, cfg.iql, data_hash);
  write_loss_csv((fs::path(out) / "loss.csv").string(), result.v_loss_history,
                 result.q_loss_history, "step,v_loss,q_loss");

  json inputs;
  inputs["dataset"] = input_entry(data_path);
  json outputs;
  outputs["v_loss_final"] = result.v_loss_history.back();
  outputs["q_loss_final"] = result.q_loss_history.back();
  outputs["critic_hash"] = critic_content_hash(result.critics);
  write_run_record(out, "train-value", {{"iql", vcs::to_json(cfg.iql)}}, inputs,
                   outputs);
  std::cout << "critics saved to " << out
            << " (final q loss " << result.q_loss_history.back() << ")\n";
  return 0;
}

int cmd_train_policy(const CommonArgs& args, const std::string& data_path,
                     const std::string& critic_dir, const std::string& objective) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (args.seed) cfg.vcs.seed = *args.seed;
  std::string out = require_out(args, cfg);
  vcs::PolicyObjective obj = vcs::objective_from_name(objective);

  vcs::Dataset data = vcs::load_dataset(data_path);
  vcs::LoadedIql critic = vcs::load_iql(critic_dir);
  vcs::PolicyResult result = vcs::train_policy(data, critic.critics, cfg.vcs, obj);
  vcs::save_policy(out, result, cfg.vcs, obj, data.r_star,
                   critic_content_hash(critic.critics));
  write_loss_csv((fs::path(out) / "loss.csv").string(), result.loss_history, {},
                 "step,loss");

  json inputs;
  inputs["dataset"] = input_entry(data_path);
  inputs["critic"] = {{"path", critic_dir}, {"dir_hash", dir_hash(critic_dir)}};
  json outputs;
  outputs["loss_final"] = result.loss_history.back();
  outputs["checkpoints"] = result.checkpoints.size();
  json resolved = {{"vcs", vcs::to_json(cfg.vcs)}, {"objective", objective}};
  write_run_record(out, "train-policy", resolved, inputs, outputs);
  std::cout << "policy (" << objective << ") saved to " << out
            << " (final loss " << result.loss_history.back() << ")\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& policy_dir,
             const std::string& registry_path, const std::string& env_flag,
             bool svg) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (!env_flag.empty()) cfg.env_id = env_flag;
  if (cfg.env_id.empty())
    throw vcs::ConfigError("eval needs an environment: --env or config \"env\"");
  std::string out = require_out(args, cfg);

  vcs::LoadedPolicy policy = vcs::load_policy(policy_dir);
  std::vector<vcs::ParamSet> checkpoints = policy.checkpoints;
  if (checkpoints.empty()) checkpoints.push_back(policy.policy);
  auto env = vcs::make_env(cfg.env_id);
  vcs::ScoreRegistry reg = vcs::load_registry(registry_path);
  cfg.eval.rtg_multipliers = policy.cfg.rtg_multipliers;
  vcs::EvalReport report = vcs::evaluate_run(checkpoints, policy.spec, *env,
                                             cfg.eval, reg, policy.r_star,
                                             cfg.goal);

  fs::create_directories(out);
  {
    std::ofstream f(fs::path(out) / "report.json");
    if (!f) throw vcs::IoError("cannot write eval report in " + out);
    f << vcs::eval_report_json(report) << "\n";
  }
  {
    std::ofstream f(fs::path(out) / "visited.csv");
    if (!f) throw vcs::IoError("cannot write visited.csv in " + out);
    vcs::write_visited_csv(f, report.sample_episodes);
  }
  if (svg) {
    std::ofstream f(fs::path(out) / "curves.svg");
    if (!f) throw vcs::IoError("cannot write curves.svg in " + out);
    vcs::write_curves_svg(f, report);
  }

  json inputs;
  inputs["policy"] = {{"path", policy_dir}, {"dir_hash", dir_hash(policy_dir)}};
  inputs["registry"] = input_entry(registry_path);
  json outputs;
  outputs["best_final"] = report.best_final;
  outputs["final_per_multiplier"] = report.final_per_multiplier;
  json resolved = {{"env", cfg.env_id}, {"eval", vcs::to_json(cfg.eval)}};
  if (!cfg.goal.empty()) resolved["eval"]["goal"] = cfg.goal;
  write_run_record(out, "eval", resolved, inputs, outputs);
  std::printf("best final normalized score %.3f\n", report.best_final);
  return 0;
}

int cmd_omrr(const CommonArgs& args, const std::string& critic_dir,
             const std::string& data_path) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (args.seed) cfg.ntk.seed = *args.seed;
  std::string out = require_out(args, cfg);

  vcs::Dataset data = vcs::load_dataset(data_path);
  vcs::LoadedIql critic = vcs::load_iql(critic_dir);
  vcs::ActionQuantizer quant = vcs::box_quantizer(
      data.action_dim, cfg.ntk.action_lo, cfg.ntk.action_hi, cfg.ntk.bins);
  vcs::OmrrReport report = vcs::omrr(critic.critics.q1, critic.critics.spec, data,
                                     quant, cfg.ntk.n_pairs, cfg.ntk.seed);

  fs::create_directories(out);
  {
    std::ofstream f(fs::path(out) / "omrr.json");
    if (!f) throw vcs::IoError("cannot write omrr.json in " + out);
    f << vcs::omrr_report_json(report) << "\n";
  }
  json inputs;
  inputs["dataset"] = input_entry(data_path);
  inputs["critic"] = {{"path", critic_dir}, {"dir_hash", dir_hash(critic_dir)}};
  json outputs;
  outputs["estimate"] = report.estimate;
  outputs["n_pairs"] = report.n_pairs;
  write_run_record(out, "omrr", {{"ntk", vcs::to_json(cfg.ntk)}}, inputs, outputs);
  std::printf("omrr %.6f over %ld pairs\n", report.estimate, report.n_pairs);
  return 0;
}

int cmd_profile(const CommonArgs& args, const std::string& critic_dir) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  if (cfg.ntk.profile_state.empty() || cfg.ntk.profile_ref_action.empty())
    throw vcs::ConfigError(
        "profile needs ntk.profile_state and ntk.profile_ref_action in the config");
  std::string out = require_out(args, cfg);

  vcs::LoadedIql critic = vcs::load_iql(critic_dir);
  vcs::ActionQuantizer quant = vcs::box_quantizer(
      static_cast<int>(cfg.ntk.profile_ref_action.size()), cfg.ntk.action_lo,
      cfg.ntk.action_hi, cfg.ntk.bins);
  std::vector<vcs::ProfileRow> rows =
      vcs::ntk_profile(critic.critics.q1, critic.critics.spec,
                       cfg.ntk.profile_state, cfg.ntk.profile_ref_action, quant);

  fs::create_directories(out);
  {
    std::ofstream f(fs::path(out) / "profile.csv");
    if (!f) throw vcs::IoError("cannot write profile.csv in " + out);
    vcs::write_profile_csv(f, rows);
  }
  json inputs;
  inputs["critic"] = {{"path", critic_dir}, {"dir_hash", dir_hash(critic_dir)}};
  json outputs;
  outputs["rows"] = rows.size();
  write_run_record(out, "profile", {{"ntk", vcs::to_json(cfg.ntk)}}, inputs, outputs);
  std::cout << "profile.csv with " << rows.size() << " rows written to " << out << "\n";
  return 0;
}

int cmd_spread(const CommonArgs& args, const std::string& data_path) {
  vcs::RunConfig cfg = load_config_or_default(args.config_path);
  vcs::Dataset data = vcs::load_dataset(data_path);
  vcs::StateQuantizer quant;
  quant.bins_per_dim = cfg.spread.bins_per_dim;
  quant.lo.assign(data.state_dim, cfg.spread.state_lo);
  quant.hi.assign(data.state_dim, cfg.spread.state_hi);
  double h = vcs::action_spread(data, quant);

  json doc = {{"action_spread", h},
              {"bins_per_dim", quant.bins_per_dim},
              {"dataset", input_entry(data_path)}};
  std::cout << doc.dump(2) << "\n";
  if (!args.out_dir.empty() || !cfg.out_dir.empty()) {
    std::string out = require_out(args, cfg);
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "spread.json");
    if (!f) throw vcs::IoError("cannot write spread.json in " + out);
    f << doc.dump(2) << "\n";
    json inputs;
    inputs["dataset"] = input_entry(data_path);
    write_run_record(out, "spread", {{"spread", vcs::to_json(cfg.spread)}}, inputs,
                     {{"action_spread", h}});
  }
  return 0;
}

int cmd_stitch_demo(const CommonArgs& args) {
  std::uint64_t seed = args.seed.value_or(0);
  vcs::StitchDemoResult res = vcs::run_stitch_demo(seed, args.out_dir);
  std::printf("q(s1,up)        %.4f  (stitched optimum 7)\n", res.q_s1_up);
  std::printf("q(s1,right)     %.4f  (best logged trajectory 6)\n", res.q_s1_right);
  std::printf("rcsl_only return %.1f\n", res.rcsl_return);
  std::printf("vcs return       %.1f\n", res.vcs_return);
  std::printf("q_greedy return  %.1f\n", res.q_greedy_return);
  std::printf("elapsed          %.1fs\n", res.elapsed_seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline RL laboratory: value pretraining, value-aided "
               "conditional supervised learning, NTK diagnostics"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string env_flag, data_path, critic_dir, policy_dir, registry_path;
  std::string objective = "vcs";
  bool svg = false;

  auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--config", args.config_path, "JSON run configuration");
    cmd->add_option("--out", args.out_dir, "output directory");
    if (with_seed) cmd->add_option("--seed", args.seed, "seed override");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset file");
  add_common(gen);
  gen->add_option("--env", env_flag, "environment id (stitch-grid, reach2d)");

  CLI::App* tv = app.add_subcommand("train-value", "train the IQL critics");
  add_common(tv);
  tv->add_option("--data", data_path, "dataset file")->required();

  CLI::App* tp = app.add_subcommand("train-policy", "train a conditioned policy");
  add_common(tp);
  tp->add_option("--data", data_path, "dataset file")->required();
  tp->add_option("--critic", critic_dir, "critic artifact directory")->required();
  tp->add_option("--objective", objective,
                 "vcs | rcsl_only | q_greedy | constant_w");

  CLI::App* ev = app.add_subcommand("eval", "roll out policy checkpoints");
  add_common(ev, false);
  ev->add_option("--policy", policy_dir, "policy artifact directory")->required();
  ev->add_option("--registry", registry_path, "score registry JSON")->required();
  ev->add_option("--env", env_flag, "environment id");
  ev->add_flag("--svg", svg, "also write curves.svg");

  CLI::App* om = app.add_subcommand("omrr", "offline mean-ratio NTK estimate");
  add_common(om);
  om->add_option("--critic", critic_dir, "critic artifact directory")->required();
  om->add_option("--data", data_path, "dataset file")->required();

  CLI::App* pr = app.add_subcommand("profile", "Q and NTK profile over the action grid");
  add_common(pr, false);
  pr->add_option("--critic", critic_dir, "critic artifact directory")->required();

  CLI::App* sp = app.add_subcommand("spread", "action-spread statistic of a dataset");
  add_common(sp, false);
  sp->add_option("--data", data_path, "dataset file")->required();

  CLI::App* demo = app.add_subcommand(
      "stitch-demo", "end-to-end stitching reproduction on the two-trajectory grid");
  demo->add_option("--seed", args.seed, "seed");
  demo->add_option("--out", args.out_dir, "optional artifact directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(args, env_flag);
    if (tv->parsed()) return cmd_train_value(args, data_path);
    if (tp->parsed()) return cmd_train_policy(args, data_path, critic_dir, objective);
    if (ev->parsed()) return cmd_eval(args, policy_dir, registry_path, env_flag, svg);
    if (om->parsed()) return cmd_omrr(args, critic_dir, data_path);
    if (pr->parsed()) return cmd_profile(args, critic_dir);
    if (sp->parsed()) return cmd_spread(args, data_path);
    if (demo->parsed()) return cmd_stitch_demo(args);
  } catch (const vcs::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const vcs::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const vcs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vcs::DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vcs::InvalidActionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vcs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
