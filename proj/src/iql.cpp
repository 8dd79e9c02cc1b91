#include "vcs/iql.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace vcs {

double QEnsemble::min_q(const Vec& state_action) const {
  double a = forward(q1, spec, state_action)[0];
  double b = forward(q2, spec, state_action)[0];
  return std::min(a, b);
}

double QEnsemble::target_min_q(const Vec& state_action) const {
  double a = forward(q1_target, spec, state_action)[0];
  double b = forward(q2_target, spec, state_action)[0];
  return std::min(a, b);
}

QEnsemble make_ensemble(int state_dim, int action_dim,
                        const std::vector<int>& hidden, std::uint64_t seed) {
  if (state_dim < 1 || action_dim < 1)
    throw ConfigError("ensemble needs positive state/action dims");
  QEnsemble ens;
  ens.spec.layer_widths.push_back(state_dim + action_dim);
  for (int h : hidden) ens.spec.layer_widths.push_back(h);
  ens.spec.layer_widths.push_back(1);
  ens.spec.validate();
  ens.q1 = net_init(ens.spec, derive_seed(seed, 0x71));
  ens.q2 = net_init(ens.spec, derive_seed(seed, 0x72));
  ens.q1_target = ens.q1;
  ens.q2_target = ens.q2;
  return ens;
}

void IqlConfig::validate() const {
  if (expectile < 0.5 || expectile >= 1.0)
    throw ConfigError("expectile must lie in [0.5, 1)");
  if (discount < 0.0 || discount > 1.0)
    throw ConfigError("discount must lie in [0, 1]");
  if (target_rate < 0.0 || target_rate > 1.0)
    throw ConfigError("target_rate must lie in [0, 1]");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (gradient_steps < 1) throw ConfigError("gradient_steps must be >= 1");
  if (hidden.empty()) throw ConfigError("need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be >= 1");
}

double expectile_loss(double u, double eta) {
  double w = std::fabs(eta - (u < 0.0 ? 1.0 : 0.0));
  return w * u * u;
}

double expectile_loss_grad(double u, double eta) {
  double w = std::fabs(eta - (u < 0.0 ? 1.0 : 0.0));
  return 2.0 * w * u;
}

std::vector<Transition> flatten_transitions(const Dataset& data) {
  data.validate();
  std::vector<Transition> out;
  out.reserve(data.transition_count());
  for (const auto& traj : data.trajectories) {
    int L = traj.length();
    for (int t = 0; t < L; ++t) {
      Transition tr;
      tr.state = traj.states[t];
      tr.state_action = traj.states[t];
      tr.state_action.insert(tr.state_action.end(), traj.actions[t].begin(),
                             traj.actions[t].end());
      tr.reward = traj.rewards[t];
      tr.next_state = traj.states[t + 1];
      tr.done = traj.terminal && t == L - 1;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

double v_step(ParamSet& v, const NetSpec& v_spec, const QEnsemble& critics,
              const std::vector<Transition>& transitions,
              const std::vector<std::size_t>& batch, double eta,
              AdamState& opt, double lr, double weight_decay) {
  if (batch.empty()) throw DimensionError("v_step: empty batch");
  double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Vec grad(v.values.size(), 0.0);
  ForwardCache cache;
  Gradient g;
  for (std::size_t idx : batch) {
    const Transition& tr = transitions[idx];
    double target = critics.target_min_q(tr.state_action);
    double value = forward(v, v_spec, tr.state, &cache)[0];
    double u = target - value;
    loss += expectile_loss(u, eta) * inv_b;
    double dl_dv = -expectile_loss_grad(u, eta) * inv_b;
    backward_into(v, v_spec, cache, {dl_dv}, g);
    axpy(grad, 1.0, g.wrt_params);
  }
  adam_step(v, grad, opt, lr, weight_decay);
  return loss;
}

double q_step(QEnsemble& critics, const ParamSet& v, const NetSpec& v_spec,
              const std::vector<Transition>& transitions,
              const std::vector<std::size_t>& batch, double gamma,
              AdamState& opt1, AdamState& opt2, double lr,
              double weight_decay) {
  if (batch.empty()) throw DimensionError("q_step: empty batch");
  double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss1 = 0.0, loss2 = 0.0;
  Vec grad1(critics.q1.values.size(), 0.0);
  Vec grad2(critics.q2.values.size(), 0.0);
  ForwardCache cache;
  Gradient g;
  for (std::size_t idx : batch) {
    const Transition& tr = transitions[idx];
    double target = tr.reward;
    if (!tr.done)
      target += gamma * forward(v, v_spec, tr.next_state)[0];

    double q1 = forward(critics.q1, critics.spec, tr.state_action, &cache)[0];
    double e1 = target - q1;
    loss1 += e1 * e1 * inv_b;
    backward_into(critics.q1, critics.spec, cache, {-2.0 * e1 * inv_b}, g);
    axpy(grad1, 1.0, g.wrt_params);

    double q2 = forward(critics.q2, critics.spec, tr.state_action, &cache)[0];
    double e2 = target - q2;
    loss2 += e2 * e2 * inv_b;
    backward_into(critics.q2, critics.spec, cache, {-2.0 * e2 * inv_b}, g);
    axpy(grad2, 1.0, g.wrt_params);
  }
  adam_step(critics.q1, grad1, opt1, lr, weight_decay);
  adam_step(critics.q2, grad2, opt2, lr, weight_decay);
  return 0.5 * (loss1 + loss2);
}

IqlResult train_iql(const Dataset& data, const IqlConfig& cfg) {
  cfg.validate();
  data.validate();
  std::vector<Transition> transitions = flatten_transitions(data);

  IqlResult res;
  res.critics = make_ensemble(data.state_dim, data.action_dim, cfg.hidden, cfg.seed);
  res.v_spec.layer_widths.push_back(data.state_dim);
  for (int h : cfg.hidden) res.v_spec.layer_widths.push_back(h);
  res.v_spec.layer_widths.push_back(1);
  res.v = net_init(res.v_spec, derive_seed(cfg.seed, 0x76));

  AdamState opt_v = adam_init(res.v.values.size());
  AdamState opt_q1 = adam_init(res.critics.q1.values.size());
  AdamState opt_q2 = adam_init(res.critics.q2.values.size());

  Rng rng(derive_seed(cfg.seed, 0xba7c4));
  std::vector<std::size_t> batch(cfg.batch_size);
  res.v_loss_history.reserve(cfg.gradient_steps);
  res.q_loss_history.reserve(cfg.gradient_steps);

  for (long step = 0; step < cfg.gradient_steps; ++step) {
    for (auto& idx : batch) idx = rng.randint(transitions.size());
    double vl = v_step(res.v, res.v_spec, res.critics, transitions, batch,
                       cfg.expectile, opt_v, cfg.lr, cfg.weight_decay);
    double ql = q_step(res.critics, res.v, res.v_spec, transitions, batch,
                       cfg.discount, opt_q1, opt_q2, cfg.lr, cfg.weight_decay);
    if (!std::isfinite(vl) || !std::isfinite(ql))
      throw DivergenceError("non-finite loss in value training", step);
    res.v_loss_history.push_back(vl);
    res.q_loss_history.push_back(ql);
    polyak_update(res.critics.q1_target, res.critics.q1, cfg.target_rate);
    polyak_update(res.critics.q2_target, res.critics.q2, cfg.target_rate);
  }
  return res;
}

void save_iql(const std::string& dir, const IqlResult& result,
              const IqlConfig& cfg, const std::string& dataset_hash) {
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) { return dir + "/" + name; };
  save_params(path("q1.vcsp"), result.critics.q1, result.critics.spec);
  save_params(path("q2.vcsp"), result.critics.q2, result.critics.spec);
  save_params(path("q1_target.vcsp"), result.critics.q1_target, result.critics.spec);
  save_params(path("q2_target.vcsp"), result.critics.q2_target, result.critics.spec);
  save_params(path("v.vcsp"), result.v, result.v_spec);
  nlohmann::json manifest = {
      {"kind", "iql"},
      {"expectile", cfg.expectile},
      {"discount", cfg.discount},
      {"target_rate", cfg.target_rate},
      {"lr", cfg.lr},
      {"weight_decay", cfg.weight_decay},
      {"batch_size", cfg.batch_size},
      {"gradient_steps", cfg.gradient_steps},
      {"hidden", cfg.hidden},
      {"seed", cfg.seed},
      {"dataset_hash", dataset_hash},
  };
  std::ofstream out(path("manifest.json"));
  if (!out) throw IoError("cannot write critic manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

LoadedIql load_iql(const std::string& dir) {
  auto path = [&](const char* name) { return dir + "/" + name; };
  LoadedIql loaded;
  auto [q1, spec] = load_params(path("q1.vcsp"));
  loaded.critics.spec = spec;
  loaded.critics.q1 = std::move(q1);
  auto check = [&](std::pair<ParamSet, NetSpec> got, const char* what) {
    if (!(got.second == loaded.critics.spec))
      throw DimensionError(std::string("critic snapshot spec mismatch: ") + what);
    return std::move(got.first);
  };
  loaded.critics.q2 = check(load_params(path("q2.vcsp")), "q2");
  loaded.critics.q1_target = check(load_params(path("q1_target.vcsp")), "q1_target");
  loaded.critics.q2_target = check(load_params(path("q2_target.vcsp")), "q2_target");
  auto [v, v_spec] = load_params(path("v.vcsp"));
  loaded.v = std::move(v);
  loaded.v_spec = std::move(v_spec);

  std::ifstream in(path("manifest.json"));
  if (!in) throw IoError("missing critic manifest in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed critic manifest: ") + e.what());
  }
  loaded.cfg.expectile = manifest.value("expectile", loaded.cfg.expectile);
  loaded.cfg.discount = manifest.value("discount", loaded.cfg.discount);
  loaded.cfg.target_rate = manifest.value("target_rate", loaded.cfg.target_rate);
  loaded.cfg.lr = manifest.value("lr", loaded.cfg.lr);
  loaded.cfg.weight_decay = manifest.value("weight_decay", loaded.cfg.weight_decay);
  loaded.cfg.batch_size = manifest.value("batch_size", loaded.cfg.batch_size);
  loaded.cfg.gradient_steps = manifest.value("gradient_steps", loaded.cfg.gradient_steps);
  if (manifest.contains("hidden"))
    loaded.cfg.hidden = manifest.at("hidden").get<std::vector<int>>();
  loaded.cfg.seed = manifest.value("seed", loaded.cfg.seed);
  loaded.dataset_hash = manifest.value("dataset_hash", std::string{});
  return loaded;
}

}  // namespace vcs
