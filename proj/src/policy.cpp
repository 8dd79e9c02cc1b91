#include "vcs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>

#include <json.hpp>

namespace vcs {

std::string cond_mode_name(CondMode m) {
  return m == CondMode::Rtg ? "rtg" : "subgoal";
}

CondMode cond_mode_from_name(const std::string& name) {
  if (name == "rtg") return CondMode::Rtg;
  if (name == "subgoal") return CondMode::Subgoal;
  throw ConfigError("unknown conditioning mode: " + name);
}

NetSpec PolicySpec::net_spec() const {
  validate();
  NetSpec spec;
  spec.layer_widths.push_back(input_width());
  for (int h : hidden) spec.layer_widths.push_back(h);
  spec.layer_widths.push_back(action_dim);
  return spec;
}

void PolicySpec::validate() const {
  if (context_len < 1) throw ConfigError("context length must be >= 1");
  if (state_dim < 1 || action_dim < 1)
    throw ConfigError("policy needs positive state/action dims");
  if (hidden.empty()) throw ConfigError("policy needs at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
}

double vcs_weight(double source_return, const VcsWeightFn& fn) {
  return std::max(fn.lambda * (fn.r_star - source_return), fn.floor);
}

std::vector<Vec> make_conditioner(CondMode mode, const Trajectory& traj, int t,
                                  int K, Rng& rng) {
  int L = traj.length();
  if (t < 0 || t >= L) throw DimensionError("conditioner start out of range");
  if (K < 1) throw ConfigError("window length K must be >= 1");
  std::vector<Vec> cond(K);
  if (mode == CondMode::Rtg) {
    Vec rtg = compute_rtg(traj);
    int last = std::min(t + K - 1, L - 1);
    int pad = K - (last - t + 1);
    for (int slot = 0; slot < K; ++slot) cond[slot] = {0.0};
    for (int j = 0; t + j <= last; ++j) cond[pad + j] = {rtg[t + j]};
  } else {
    // one future state, uniform over indices > t; at the final step this
    // always lands on the trajectory's last state
    int lo = t + 1;
    int hi = L;  // states index up to L
    int pick = lo + static_cast<int>(rng.randint(static_cast<std::uint64_t>(hi - lo + 1)));
    const Vec& goal = traj.states[pick];
    for (int slot = 0; slot < K; ++slot) cond[slot] = goal;
  }
  return cond;
}

Vec policy_input(const PolicySpec& spec, const WindowSample& sample, int upto) {
  int K = spec.context_len;
  int cd = spec.cond_dim();
  int sd = spec.state_dim;
  if (static_cast<int>(sample.sub.state_window.size()) != K ||
      static_cast<int>(sample.cond.size()) != K)
    throw DimensionError("window sample does not match policy context length");
  if (upto < 0 || upto >= K) throw DimensionError("window slot out of range");

  Vec input(spec.input_width(), 0.0);
  for (int slot = 0; slot <= upto; ++slot) {
    if (!sample.sub.valid[slot]) continue;
    if (static_cast<int>(sample.cond[slot].size()) != cd)
      throw DimensionError("conditioner dimension mismatch");
    if (static_cast<int>(sample.sub.state_window[slot].size()) != sd)
      throw DimensionError("window state dimension mismatch");
    int base = slot * (cd + sd);
    for (int i = 0; i < cd; ++i) input[base + i] = sample.cond[slot][i];
    for (int i = 0; i < sd; ++i) input[base + cd + i] = sample.sub.state_window[slot][i];
    input[K * (cd + sd) + slot] = 1.0;
  }
  return input;
}

double q_normalizer(const Dataset& data, const QEnsemble& critics) {
  data.validate();
  if (critics.spec.input_width() != data.state_dim + data.action_dim)
    throw DimensionError("critic does not match dataset dimensions");
  double total = 0.0;
  std::size_t n = 0;
  Vec sa;
  for (const auto& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      sa = traj.states[t];
      sa.insert(sa.end(), traj.actions[t].begin(), traj.actions[t].end());
      total += critics.min_q(sa);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

std::string aid_domain_name(AidDomain d) {
  switch (d) {
    case AidDomain::Raw: return "raw";
    case AidDomain::Simplex: return "simplex";
    case AidDomain::Box: return "box";
  }
  throw ConfigError("unknown aid domain");
}

AidDomain aid_domain_from_name(const std::string& name) {
  if (name == "raw") return AidDomain::Raw;
  if (name == "simplex") return AidDomain::Simplex;
  if (name == "box") return AidDomain::Box;
  throw ConfigError("unknown aid domain: " + name);
}

namespace {

// Softmax over the coordinates with mask != 0; the rest get probability 0.
// An empty mask includes everything.
Vec stable_softmax(const Vec& z, const Vec& mask) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i)
    if (mask.empty() || mask[i] != 0.0) m = std::max(m, z[i]);
  if (!std::isfinite(m)) throw DimensionError("softmax mask excludes every coordinate");
  Vec p(z.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask.empty() && mask[i] == 0.0) continue;
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace

std::map<Vec, Vec> in_sample_action_masks(const Dataset& data) {
  std::map<Vec, Vec> masks;
  for (const Trajectory& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      Vec& mask = masks[traj.states[t]];
      if (mask.empty()) mask.assign(data.action_dim, 0.0);
      for (int d = 0; d < data.action_dim; ++d)
        if (traj.actions[t][d] != 0.0) mask[d] = 1.0;
    }
  }
  return masks;
}

LossResult vcs_loss(const ParamSet& policy, const PolicySpec& spec,
                    const std::vector<WindowSample>& batch,
                    const QEnsemble& critics, const VcsWeightFn& weight_fn,
                    double q_norm, bool include_bc, AidDomain domain) {
  spec.validate();
  if (batch.empty()) throw DimensionError("vcs_loss: empty batch");
  if (q_norm == 0.0) throw ConfigError("vcs_loss: zero critic normalizer");
  NetSpec net = spec.net_spec();
  if (policy.values.size() != net.param_count())
    throw DimensionError("vcs_loss: policy parameter count mismatch");

  LossResult res;
  res.grad.assign(policy.values.size(), 0.0);

  ForwardCache pi_cache, q_cache, q2_cache;
  Gradient g;
  long n_valid = 0;
  double bc_sum = 0.0, aid_sum = 0.0;

  for (const WindowSample& sample : batch) {
    double w = vcs_weight(sample.sub.source_return, weight_fn);
    double beta = w / q_norm;
    for (int slot = 0; slot < spec.context_len; ++slot) {
      if (!sample.sub.valid[slot]) continue;
      ++n_valid;
      Vec input = policy_input(spec, sample, slot);
      Vec pi = forward(policy, net, input, &pi_cache);
      Vec out_grad(spec.action_dim, 0.0);

      if (include_bc) {
        const Vec& target = sample.sub.action_targets[slot];
        for (int d = 0; d < spec.action_dim; ++d) {
          double diff = pi[d] - target[d];
          bc_sum += diff * diff;
          out_grad[d] += 2.0 * diff;
        }
      }
      if (w != 0.0) {
        Vec query = pi;
        Vec probs;
        if (domain == AidDomain::Simplex) {
          static const Vec kNoMask;
          const Vec& mask = sample.aid_masks.empty() ? kNoMask
                                                     : sample.aid_masks[slot];
          probs = stable_softmax(pi, mask);
          query = probs;
        } else if (domain == AidDomain::Box) {
          for (double& x : query) x = std::clamp(x, -1.0, 1.0);
        }
        Vec sa = sample.sub.state_window[slot];
        sa.insert(sa.end(), query.begin(), query.end());
        double q1 = forward(critics.q1, critics.spec, sa, &q_cache)[0];
        double q2 = forward(critics.q2, critics.spec, sa, &q2_cache)[0];
        // ties go to q1
        const ParamSet* which = q1 <= q2 ? &critics.q1 : &critics.q2;
        const ForwardCache* which_cache = q1 <= q2 ? &q_cache : &q2_cache;
        aid_sum += -beta * std::min(q1, q2);
        backward_into(*which, critics.spec, *which_cache, {1.0}, g);
        // gradient flows into the policy only through the action slice,
        // chained through the aid-domain map
        if (domain == AidDomain::Simplex) {
          double pv = 0.0;
          for (int d = 0; d < spec.action_dim; ++d)
            pv += probs[d] * g.wrt_input[spec.state_dim + d];
          for (int d = 0; d < spec.action_dim; ++d)
            out_grad[d] +=
                -beta * probs[d] * (g.wrt_input[spec.state_dim + d] - pv);
        } else {
          for (int d = 0; d < spec.action_dim; ++d) {
            if (domain == AidDomain::Box && (pi[d] < -1.0 || pi[d] > 1.0))
              continue;
            out_grad[d] += -beta * g.wrt_input[spec.state_dim + d];
          }
        }
      }
      backward_into(policy, net, pi_cache, out_grad, g);
      axpy(res.grad, 1.0, g.wrt_params);
    }
  }
  if (n_valid == 0) throw DimensionError("vcs_loss: batch has no valid steps");
  double inv = 1.0 / static_cast<double>(n_valid);
  for (double& x : res.grad) x *= inv;
  res.bc_term = bc_sum * inv;
  res.aid_term = aid_sum * inv;
  res.loss = res.bc_term + res.aid_term;
  if (!std::isfinite(res.loss))
    throw DivergenceError("non-finite policy loss", -1);
  return res;
}

std::string objective_name(PolicyObjective o) {
  switch (o) {
    case PolicyObjective::Vcs: return "vcs";
    case PolicyObjective::RcslOnly: return "rcsl_only";
    case PolicyObjective::QGreedy: return "q_greedy";
    case PolicyObjective::ConstantW: return "constant_w";
  }
  return "?";
}

PolicyObjective objective_from_name(const std::string& name) {
  if (name == "vcs") return PolicyObjective::Vcs;
  if (name == "rcsl_only") return PolicyObjective::RcslOnly;
  if (name == "q_greedy") return PolicyObjective::QGreedy;
  if (name == "constant_w") return PolicyObjective::ConstantW;
  throw ConfigError("unknown policy objective: " + name);
}

void VcsConfig::validate() const {
  if (context_len < 1) throw ConfigError("context length must be >= 1");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (weight_floor < 0.0) throw ConfigError("weight floor must be >= 0");
  if (gradient_steps < 1) throw ConfigError("gradient_steps must be >= 1");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (hidden.empty()) throw ConfigError("need at least one hidden layer");
  if (rtg_multipliers.empty()) throw ConfigError("need at least one RTG multiplier");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

PolicyResult train_policy(const Dataset& data, const QEnsemble& critics,
                          const VcsConfig& cfg, PolicyObjective objective) {
  cfg.validate();
  data.validate();

  PolicyResult res;
  res.spec.context_len = cfg.context_len;
  res.spec.mode = cfg.mode;
  res.spec.hidden = cfg.hidden;
  res.spec.state_dim = data.state_dim;
  res.spec.action_dim = data.action_dim;
  NetSpec net = res.spec.net_spec();
  res.policy = net_init(net, derive_seed(cfg.seed, 0x90));
  res.checkpoint_interval = cfg.checkpoint_interval;

  bool uses_critic = objective != PolicyObjective::RcslOnly;
  double q_norm = 1.0;
  if (uses_critic) {
    double raw = q_normalizer(data, critics);
    if (raw == 0.0) throw ConfigError("train_policy: zero critic normalizer");
    // only the scale matters for the aid term; a sign flip would turn the
    // aid into value avoidance on tasks with all-negative returns
    q_norm = std::fabs(raw);
  }
  res.q_norm = q_norm;

  VcsWeightFn weight_fn;
  weight_fn.r_star = data.r_star;
  switch (objective) {
    case PolicyObjective::Vcs:
    case PolicyObjective::QGreedy:
      weight_fn.lambda = cfg.lambda;
      weight_fn.floor = cfg.weight_floor;
      break;
    case PolicyObjective::RcslOnly:
      weight_fn.lambda = 0.0;
      weight_fn.floor = 0.0;
      break;
    case PolicyObjective::ConstantW:
      weight_fn.lambda = 0.0;
      weight_fn.floor = cfg.constant_weight;
      break;
  }
  bool include_bc = objective != PolicyObjective::QGreedy;

  AdamState opt = adam_init(res.policy.values.size());
  LrSchedule sched{cfg.lr, cfg.warmup_steps};
  Rng rng(derive_seed(cfg.seed, 0x9a11e7));
  res.loss_history.reserve(cfg.gradient_steps);

  std::map<Vec, Vec> state_masks;
  if (cfg.aid_domain == AidDomain::Simplex)
    state_masks = in_sample_action_masks(data);

  std::vector<WindowSample> batch(cfg.batch_size);
  for (long step = 0; step < cfg.gradient_steps; ++step) {
    for (auto& sample : batch) {
      sample.sub = sample_subtrajectory(data, cfg.context_len, rng);
      sample.cond = make_conditioner(cfg.mode, data.trajectories[sample.sub.traj_index],
                                     sample.sub.start, cfg.context_len, rng);
      if (!state_masks.empty()) {
        sample.aid_masks.assign(cfg.context_len, Vec());
        for (int slot = 0; slot < cfg.context_len; ++slot) {
          if (!sample.sub.valid[slot]) continue;
          auto it = state_masks.find(sample.sub.state_window[slot]);
          if (it != state_masks.end()) sample.aid_masks[slot] = it->second;
        }
      }
    }
    LossResult lr_res = vcs_loss(res.policy, res.spec, batch, critics, weight_fn,
                                 q_norm, include_bc, cfg.aid_domain);
    adam_step(res.policy, lr_res.grad, opt, sched.lr(step), cfg.weight_decay);
    res.loss_history.push_back(lr_res.loss);
    if (cfg.checkpoint_interval > 0 && (step + 1) % cfg.checkpoint_interval == 0)
      res.checkpoints.push_back(res.policy);
  }
  if (cfg.checkpoint_interval > 0 &&
      cfg.gradient_steps % cfg.checkpoint_interval != 0)
    res.checkpoints.push_back(res.policy);
  return res;
}

void save_policy(const std::string& dir, const PolicyResult& result,
                 const VcsConfig& cfg, PolicyObjective objective, double r_star,
                 const std::string& critic_hash) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const NetSpec net = result.spec.net_spec();
  save_params((fs::path(dir) / "policy.vcsp").string(), result.policy, net);
  nlohmann::json ckpts = nlohmann::json::array();
  for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
    std::string name = "checkpoint_" + std::to_string(i) + ".vcsp";
    save_params((fs::path(dir) / name).string(), result.checkpoints[i], net);
    ckpts.push_back(name);
  }

  nlohmann::json m;
  m["kind"] = "vcs-policy";
  m["objective"] = objective_name(objective);
  m["mode"] = cond_mode_name(result.spec.mode);
  m["context_len"] = result.spec.context_len;
  m["state_dim"] = result.spec.state_dim;
  m["action_dim"] = result.spec.action_dim;
  m["hidden"] = result.spec.hidden;
  m["lambda"] = cfg.lambda;
  m["weight_floor"] = cfg.weight_floor;
  m["constant_weight"] = cfg.constant_weight;
  m["r_star"] = r_star;
  m["rtg_multipliers"] = cfg.rtg_multipliers;
  m["gradient_steps"] = cfg.gradient_steps;
  m["lr"] = cfg.lr;
  m["warmup_steps"] = cfg.warmup_steps;
  m["batch_size"] = cfg.batch_size;
  m["weight_decay"] = cfg.weight_decay;
  m["seed"] = cfg.seed;
  m["aid_domain"] = aid_domain_name(cfg.aid_domain);
  m["checkpoint_interval"] = result.checkpoint_interval;
  m["checkpoints"] = ckpts;
  m["q_norm"] = result.q_norm;
  m["critic_hash"] = critic_hash;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write policy manifest in " + dir);
  out << m.dump(2) << "\n";
}

LoadedPolicy load_policy(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot read policy manifest in " + dir);
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad policy manifest in " + dir + ": " + e.what());
  }

  LoadedPolicy loaded;
  try {
    loaded.objective = objective_from_name(m.at("objective").get<std::string>());
    loaded.spec.mode = cond_mode_from_name(m.at("mode").get<std::string>());
    loaded.spec.context_len = m.at("context_len").get<int>();
    loaded.spec.state_dim = m.at("state_dim").get<int>();
    loaded.spec.action_dim = m.at("action_dim").get<int>();
    loaded.spec.hidden = m.at("hidden").get<std::vector<int>>();
    loaded.cfg.context_len = loaded.spec.context_len;
    loaded.cfg.mode = loaded.spec.mode;
    loaded.cfg.hidden = loaded.spec.hidden;
    loaded.cfg.lambda = m.at("lambda").get<double>();
    loaded.cfg.weight_floor = m.at("weight_floor").get<double>();
    loaded.cfg.constant_weight = m.at("constant_weight").get<double>();
    loaded.cfg.rtg_multipliers = m.at("rtg_multipliers").get<std::vector<double>>();
    loaded.cfg.gradient_steps = m.at("gradient_steps").get<long>();
    loaded.cfg.lr = m.at("lr").get<double>();
    loaded.cfg.warmup_steps = m.at("warmup_steps").get<long>();
    loaded.cfg.batch_size = m.at("batch_size").get<int>();
    loaded.cfg.weight_decay = m.at("weight_decay").get<double>();
    loaded.cfg.seed = m.at("seed").get<std::uint64_t>();
    loaded.cfg.aid_domain = aid_domain_from_name(m.at("aid_domain").get<std::string>());
    loaded.cfg.checkpoint_interval = m.at("checkpoint_interval").get<int>();
    loaded.r_star = m.at("r_star").get<double>();
    loaded.critic_hash = m.at("critic_hash").get<std::string>();
    const NetSpec net = loaded.spec.net_spec();
    auto [policy, got] = load_params((fs::path(dir) / "policy.vcsp").string());
    if (!(got == net))
      throw IoError("policy file does not match manifest architecture in " + dir);
    loaded.policy = std::move(policy);
    for (const auto& name : m.at("checkpoints")) {
      auto [ckpt, cspec] =
          load_params((fs::path(dir) / name.get<std::string>()).string());
      if (!(cspec == net))
        throw IoError("checkpoint does not match manifest architecture in " + dir);
      loaded.checkpoints.push_back(std::move(ckpt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad policy manifest in " + dir + ": " + e.what());
  }
  return loaded;
}

}  // namespace vcs
