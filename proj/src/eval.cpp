#include "vcs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace vcs {

void EvalConfig::validate() const {
  if (episodes_per_checkpoint < 1)
    throw ConfigError("episodes_per_checkpoint must be >= 1");
  if (checkpoint_interval < 1) throw ConfigError("checkpoint_interval must be >= 1");
  if (running_window < 1) throw ConfigError("running_window must be >= 1");
  if (seeds.empty()) throw ConfigError("need at least one eval seed");
  if (rtg_multipliers.empty()) throw ConfigError("need at least one RTG multiplier");
}

RolloutResult rollout_policy(const ParamSet& policy, const PolicySpec& spec,
                             Env& env, const CondTarget& target,
                             std::uint64_t seed) {
  spec.validate();
  if (spec.state_dim != env.state_dim() || spec.action_dim != env.action_dim())
    throw DimensionError("policy does not match environment dimensions");
  if (target.mode != spec.mode)
    throw ConfigError("conditioning mode does not match the policy");
  if (spec.mode == CondMode::Subgoal &&
      static_cast<int>(target.goal.size()) != spec.state_dim)
    throw DimensionError("goal dimension mismatch");

  NetSpec net = spec.net_spec();
  int K = spec.context_len;

  Rng rng(seed);
  RolloutResult res;
  Vec state = env.reset(rng);
  res.visited.push_back(state);

  double rtg = target.target_rtg;
  std::vector<std::pair<Vec, Vec>> history;  // (cond, state) per step

  for (int t = 0; t < env.horizon(); ++t) {
    Vec cond = spec.mode == CondMode::Rtg ? Vec{rtg} : target.goal;
    res.rtg_trace.push_back(rtg);
    history.emplace_back(cond, state);

    // right-aligned window: the current step sits in the last slot
    WindowSample sample;
    sample.sub.state_window.assign(K, Vec(spec.state_dim, 0.0));
    sample.sub.action_targets.assign(K, Vec(spec.action_dim, 0.0));
    sample.sub.rtg_window.assign(K, 0.0);
    sample.sub.valid.assign(K, 0);
    sample.cond.assign(K, Vec(spec.cond_dim(), 0.0));
    int n_fill = std::min<int>(K, static_cast<int>(history.size()));
    for (int j = 0; j < n_fill; ++j) {
      const auto& [c, s] = history[history.size() - n_fill + j];
      int slot = K - n_fill + j;
      sample.cond[slot] = c;
      sample.sub.state_window[slot] = s;
      sample.sub.valid[slot] = 1;
    }
    Vec input = policy_input(spec, sample, K - 1);
    Vec raw = forward(policy, net, input);
    Vec action = env.project_action(raw);
    Env::StepOut out = env.step(action);

    res.episode_return += out.reward;
    rtg -= out.reward;
    state = out.state;
    res.visited.push_back(state);
    if (out.done) break;
  }
  return res;
}

const ScoreRef& ScoreRegistry::at(const std::string& env_id) const {
  auto it = refs.find(env_id);
  if (it == refs.end())
    throw ConfigError("environment missing from score registry: " + env_id);
  return it->second;
}

ScoreRegistry load_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score registry: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed score registry: ") + e.what());
  }
  ScoreRegistry reg;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& entry = it.value();
    for (auto f = entry.begin(); f != entry.end(); ++f) {
      if (f.key() != "random" && f.key() != "expert" && f.key() != "provenance")
        throw ConfigError("unknown key in score registry: " + f.key());
    }
    ScoreRef ref;
    ref.random_score = entry.at("random").get<double>();
    ref.expert_score = entry.at("expert").get<double>();
    ref.provenance = entry.value("provenance", "");
    if (!(ref.expert_score > ref.random_score))
      throw ConfigError("registry entry needs expert > random: " + it.key());
    reg.refs[it.key()] = ref;
  }
  return reg;
}

void save_registry(const std::string& path, const ScoreRegistry& reg) {
  nlohmann::json doc;
  for (const auto& [env_id, ref] : reg.refs) {
    doc[env_id] = {{"random", ref.random_score},
                   {"expert", ref.expert_score},
                   {"provenance", ref.provenance}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write score registry: " + path);
  out << doc.dump(2) << "\n";
}

double normalized_score(double raw, const std::string& env_id,
                        const ScoreRegistry& reg) {
  const ScoreRef& ref = reg.at(env_id);
  return 100.0 * (raw - ref.random_score) / (ref.expert_score - ref.random_score);
}

EvalReport evaluate_run(const std::vector<ParamSet>& checkpoints,
                        const PolicySpec& spec, Env& env, const EvalConfig& cfg,
                        const ScoreRegistry& reg, double base_target,
                        const Vec& goal) {
  cfg.validate();
  if (static_cast<int>(checkpoints.size()) < cfg.running_window)
    throw MissingCheckpointsError(
        "evaluate_run needs at least running_window checkpoints (" +
        std::to_string(checkpoints.size()) + " < " +
        std::to_string(cfg.running_window) + ")");

  std::size_t n_mult = cfg.rtg_multipliers.size();
  std::size_t n_seeds = cfg.seeds.size();
  std::size_t n_ckpt = checkpoints.size();

  EvalReport rep;
  rep.env_id = env.id();
  rep.multipliers = cfg.rtg_multipliers;
  rep.base_target = base_target;
  rep.curves.assign(n_mult, std::vector<double>(n_ckpt, 0.0));
  rep.per_seed_final.assign(n_mult, std::vector<double>(n_seeds, 0.0));
  rep.final_per_multiplier.assign(n_mult, 0.0);

  // scores[m][s][c]
  std::vector<std::vector<std::vector<double>>> scores(
      n_mult, std::vector<std::vector<double>>(n_seeds,
                                               std::vector<double>(n_ckpt, 0.0)));
  std::vector<std::vector<std::vector<Vec>>> last_ckpt_episodes(n_mult);

  for (std::size_t m = 0; m < n_mult; ++m) {
    CondTarget target;
    target.mode = spec.mode;
    if (spec.mode == CondMode::Rtg)
      target.target_rtg = base_target * cfg.rtg_multipliers[m];
    else
      target.goal = goal;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      for (std::size_t c = 0; c < n_ckpt; ++c) {
        double mean_score = 0.0;
        for (int e = 0; e < cfg.episodes_per_checkpoint; ++e) {
          std::uint64_t ep_seed = derive_seed(
              cfg.seeds[s], (m * 1000003ULL) ^ (c * 10007ULL) ^
                                static_cast<std::uint64_t>(e) * 101ULL);
          RolloutResult roll =
              rollout_policy(checkpoints[c], spec, env, target, ep_seed);
          mean_score +=
              normalized_score(roll.episode_return, rep.env_id, reg);
          if (c == n_ckpt - 1)
            last_ckpt_episodes[m].push_back(roll.visited);
        }
        scores[m][s][c] = mean_score / cfg.episodes_per_checkpoint;
      }
    }
  }

  int W = std::min<int>(cfg.running_window, static_cast<int>(n_ckpt));
  for (std::size_t m = 0; m < n_mult; ++m) {
    for (std::size_t c = 0; c < n_ckpt; ++c) {
      double acc = 0.0;
      for (std::size_t s = 0; s < n_seeds; ++s) acc += scores[m][s][c];
      rep.curves[m][c] = acc / static_cast<double>(n_seeds);
    }
    double mean_final = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      double acc = 0.0;
      for (std::size_t c = n_ckpt - W; c < n_ckpt; ++c) acc += scores[m][s][c];
      rep.per_seed_final[m][s] = acc / W;
      mean_final += rep.per_seed_final[m][s];
    }
    rep.final_per_multiplier[m] = mean_final / static_cast<double>(n_seeds);
  }
  std::size_t best_m = 0;
  for (std::size_t m = 1; m < n_mult; ++m)
    if (rep.final_per_multiplier[m] > rep.final_per_multiplier[best_m]) best_m = m;
  rep.best_final = rep.final_per_multiplier[best_m];
  rep.sample_episodes = std::move(last_ckpt_episodes[best_m]);
  return rep;
}

std::string eval_report_json(const EvalReport& rep) {
  nlohmann::json doc;
  doc["env"] = rep.env_id;
  doc["base_target"] = rep.base_target;
  doc["multipliers"] = rep.multipliers;
  doc["curves"] = rep.curves;
  doc["per_seed_final"] = rep.per_seed_final;
  doc["final_per_multiplier"] = rep.final_per_multiplier;
  doc["best_final"] = rep.best_final;
  return doc.dump(2) + "\n";
}

void write_visited_csv(std::ostream& out,
                       const std::vector<std::vector<Vec>>& episodes) {
  std::size_t dim = 0;
  for (const auto& ep : episodes)
    if (!ep.empty()) {
      dim = ep.front().size();
      break;
    }
  out << "episode,step";
  for (std::size_t d = 0; d < dim; ++d) out << ",s" << d;
  out << "\n";
  out.precision(17);
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      out << e << "," << t;
      for (double x : episodes[e][t]) out << "," << x;
      out << "\n";
    }
  }
}

void write_curves_svg(std::ostream& out, const EvalReport& rep) {
  const int width = 640, height = 400, margin = 50;
  double lo = 1e300, hi = -1e300;
  std::size_t n = 0;
  for (const auto& curve : rep.curves) {
    n = std::max(n, curve.size());
    for (double y : curve) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (n == 0) return;
  if (hi <= lo) hi = lo + 1.0;

  auto px = [&](std::size_t i) {
    return margin + (width - 2.0 * margin) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
  };
  auto py = [&](double y) {
    return height - margin - (height - 2.0 * margin) * (y - lo) / (hi - lo);
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">checkpoint</text>\n";
  out << "<text x=\"15\" y=\"" << height / 2
      << "\" font-size=\"12\" transform=\"rotate(-90 15 " << height / 2
      << ")\" text-anchor=\"middle\">normalized score</text>\n";
  for (std::size_t m = 0; m < rep.curves.size(); ++m) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[m % 4]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < rep.curves[m].size(); ++i)
      out << px(i) << "," << py(rep.curves[m][i]) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << width - margin + 5 << "\" y=\""
        << py(rep.curves[m].back()) << "\" font-size=\"11\" fill=\""
        << colors[m % 4] << "\">x" << rep.multipliers[m] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace vcs
