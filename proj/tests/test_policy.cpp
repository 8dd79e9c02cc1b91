#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "vcs/envs.hpp"
#include "vcs/policy.hpp"

using namespace vcs;

namespace {

WindowSample make_sample(std::vector<Vec> states, std::vector<Vec> actions,
                         std::vector<std::uint8_t> valid, std::vector<Vec> cond,
                         double source_return) {
  WindowSample s;
  s.sub.state_window = std::move(states);
  s.sub.action_targets = std::move(actions);
  s.sub.valid = std::move(valid);
  s.sub.rtg_window.assign(s.sub.valid.size(), 0.0);
  s.sub.source_return = source_return;
  s.cond = std::move(cond);
  return s;
}

double perturbed_loss(ParamSet p, std::size_t idx, double h,
                      const PolicySpec& spec,
                      const std::vector<WindowSample>& batch,
                      const QEnsemble& critics, const VcsWeightFn& fn,
                      double q_norm, bool include_bc, AidDomain domain) {
  p.values[idx] += h;
  return vcs_loss(p, spec, batch, critics, fn, q_norm, include_bc, domain).loss;
}

// Central finite differences on a handful of parameter coordinates.
void check_gradient(const PolicySpec& spec,
                    const std::vector<WindowSample>& batch,
                    const QEnsemble& critics, const VcsWeightFn& fn,
                    double q_norm, bool include_bc, AidDomain domain,
                    std::uint64_t seed) {
  ParamSet p = net_init(spec.net_spec(), seed);
  LossResult res =
      vcs_loss(p, spec, batch, critics, fn, q_norm, include_bc, domain);
  Rng rng(seed + 100);
  const double h = 1e-6;
  for (int trial = 0; trial < 15; ++trial) {
    std::size_t idx = static_cast<std::size_t>(rng.randint(p.values.size()));
    double plus = perturbed_loss(p, idx, h, spec, batch, critics, fn, q_norm,
                                 include_bc, domain);
    double minus = perturbed_loss(p, idx, -h, spec, batch, critics, fn, q_norm,
                                  include_bc, domain);
    double fd = (plus - minus) / (2.0 * h);
    double scale = std::max({std::fabs(fd), std::fabs(res.grad[idx]), 1e-8});
    CHECK(std::fabs(fd - res.grad[idx]) / scale < 1e-4);
  }
}

std::vector<WindowSample> fd_batch(bool with_masks) {
  // One fully valid window and one left-padded window.
  std::vector<WindowSample> batch;
  batch.push_back(make_sample({{0.2, -0.3}, {0.5, 0.1}},
                              {{0.7, -0.2, 0.1}, {-0.4, 0.3, 0.6}}, {1, 1},
                              {{0.8}, {0.4}}, 1.5));
  batch.push_back(make_sample({{0.0, 0.0}, {-0.6, 0.9}},
                              {{0.0, 0.0, 0.0}, {0.2, -0.5, 0.3}}, {0, 1},
                              {{0.0}, {0.9}}, -0.5));
  if (with_masks) {
    batch[0].aid_masks = {{1.0, 0.0, 1.0}, {0.0, 1.0, 1.0}};
    batch[1].aid_masks = {{}, {1.0, 1.0, 0.0}};
  }
  return batch;
}

}  // namespace

TEST_CASE("return weights are clamped linear ramps") {
  VcsWeightFn fn{2.0, 5.0, 0.5};
  CHECK(vcs_weight(0.0, fn) == 10.0);
  CHECK(vcs_weight(4.0, fn) == 2.0);
  CHECK(vcs_weight(5.0, fn) == 0.5);   // hits the floor at R = r_star
  CHECK(vcs_weight(50.0, fn) == 0.5);  // stays clamped beyond it

  // Nonincreasing in the return.
  double prev = vcs_weight(-10.0, fn);
  for (double r = -9.5; r <= 10.0; r += 0.5) {
    double w = vcs_weight(r, fn);
    CHECK(w <= prev);
    CHECK(w >= fn.floor);
    prev = w;
  }

  // Above the floor the weight scales linearly with lambda.
  VcsWeightFn unscaled{1.0, 5.0, 0.0};
  VcsWeightFn doubled{2.0, 5.0, 0.0};
  CHECK(vcs_weight(1.0, doubled) == 2.0 * vcs_weight(1.0, unscaled));
}

TEST_CASE("mode, domain and objective names round trip") {
  CHECK(cond_mode_from_name(cond_mode_name(CondMode::Rtg)) == CondMode::Rtg);
  CHECK(cond_mode_from_name("subgoal") == CondMode::Subgoal);
  CHECK_THROWS_AS(cond_mode_from_name("goal"), ConfigError&);

  for (AidDomain d : {AidDomain::Raw, AidDomain::Simplex, AidDomain::Box})
    CHECK(aid_domain_from_name(aid_domain_name(d)) == d);
  CHECK_THROWS_AS(aid_domain_from_name("ball"), ConfigError&);

  for (PolicyObjective o :
       {PolicyObjective::Vcs, PolicyObjective::RcslOnly, PolicyObjective::QGreedy,
        PolicyObjective::ConstantW})
    CHECK(objective_from_name(objective_name(o)) == o);
  CHECK_THROWS_AS(objective_from_name("bc"), ConfigError&);
}

TEST_CASE("rtg conditioners carry per-slot returns to go") {
  Trajectory traj;
  traj.states = {{0.0}, {1.0}, {2.0}, {3.0}};
  traj.actions = {{0.1}, {0.2}, {0.3}};
  traj.rewards = {3.0, 1.0, 1.0};
  traj.terminal = true;

  Rng rng(0);
  auto full = make_conditioner(CondMode::Rtg, traj, 0, 2, rng);
  REQUIRE(full.size() == 2);
  CHECK(full[0] == Vec{5.0});
  CHECK(full[1] == Vec{2.0});

  // A window past the episode end is left-padded with zeros.
  auto padded = make_conditioner(CondMode::Rtg, traj, 2, 3, rng);
  CHECK(padded[0] == Vec{0.0});
  CHECK(padded[1] == Vec{0.0});
  CHECK(padded[2] == Vec{1.0});

  auto single = make_conditioner(CondMode::Rtg, traj, 1, 1, rng);
  CHECK(single[0] == Vec{2.0});

  CHECK_THROWS_AS(make_conditioner(CondMode::Rtg, traj, 3, 1, rng),
                  DimensionError&);
  CHECK_THROWS_AS(make_conditioner(CondMode::Rtg, traj, 0, 0, rng),
                  ConfigError&);
}

TEST_CASE("subgoal conditioners broadcast one future state") {
  Trajectory traj;
  traj.states = {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  traj.actions = {{0.1}, {0.2}, {0.3}};
  traj.rewards = {1.0, 1.0, 1.0};
  traj.terminal = true;

  // At the final step the only remaining future state is the last one.
  Rng rng(4);
  auto at_end = make_conditioner(CondMode::Subgoal, traj, 2, 2, rng);
  CHECK(at_end[0] == traj.states[3]);
  CHECK(at_end[1] == traj.states[3]);

  // Earlier steps draw a strictly future state and broadcast it.
  Rng r1(9), r2(9);
  auto a = make_conditioner(CondMode::Subgoal, traj, 0, 3, r1);
  auto b = make_conditioner(CondMode::Subgoal, traj, 0, 3, r2);
  CHECK(a == b);  // deterministic in the rng state
  CHECK(a[0] == a[1]);
  CHECK(a[1] == a[2]);
  bool is_future = a[0] == traj.states[1] || a[0] == traj.states[2] ||
                   a[0] == traj.states[3];
  CHECK(is_future);
}

TEST_CASE("policy inputs pack cond-state pairs then validity bits") {
  PolicySpec spec;
  spec.context_len = 2;
  spec.mode = CondMode::Rtg;
  spec.hidden = {4};
  spec.state_dim = 2;
  spec.action_dim = 1;
  CHECK(spec.input_width() == 8);

  WindowSample s = make_sample({{1.0, 2.0}, {3.0, 4.0}}, {{0.0}, {0.0}},
                               {1, 1}, {{9.0}, {7.0}}, 0.0);
  Vec first = policy_input(spec, s, 0);
  Vec expect_first = {9.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  CHECK(first == expect_first);
  Vec second = policy_input(spec, s, 1);
  Vec expect_second = {9.0, 1.0, 2.0, 7.0, 3.0, 4.0, 1.0, 1.0};
  CHECK(second == expect_second);

  // Padding slots stay zero with their validity bit off.
  WindowSample padded = make_sample({{0.0, 0.0}, {3.0, 4.0}}, {{0.0}, {0.0}},
                                    {0, 1}, {{5.0}, {7.0}}, 0.0);
  Vec vis = policy_input(spec, padded, 1);
  Vec expect_pad = {0.0, 0.0, 0.0, 7.0, 3.0, 4.0, 0.0, 1.0};
  CHECK(vis == expect_pad);

  CHECK_THROWS_AS(policy_input(spec, s, 2), DimensionError&);
  CHECK_THROWS_AS(policy_input(spec, s, -1), DimensionError&);
}

TEST_CASE("policy spec validation rejects degenerate shapes") {
  PolicySpec ok;
  ok.state_dim = 2;
  ok.action_dim = 1;
  CHECK_NOTHROW(ok.validate());

  PolicySpec bad_ctx = ok;
  bad_ctx.context_len = 0;
  CHECK_THROWS_AS(bad_ctx.validate(), ConfigError&);

  PolicySpec no_state = ok;
  no_state.state_dim = 0;
  CHECK_THROWS_AS(no_state.validate(), ConfigError&);

  PolicySpec no_hidden = ok;
  no_hidden.hidden = {};
  CHECK_THROWS_AS(no_hidden.validate(), ConfigError&);
}

TEST_CASE("the critic normalizer is the signed in-sample mean") {
  Dataset data = stitch::dataset();
  QEnsemble ens = make_ensemble(data.state_dim, data.action_dim, {6}, 11);

  double total = 0.0;
  std::size_t n = 0;
  for (const auto& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      Vec sa = traj.states[t];
      sa.insert(sa.end(), traj.actions[t].begin(), traj.actions[t].end());
      total += std::min(forward(ens.q1, ens.spec, sa)[0],
                        forward(ens.q2, ens.spec, sa)[0]);
      ++n;
    }
  }
  CHECK(q_normalizer(data, ens) ==
        doctest::Approx(total / static_cast<double>(n)).epsilon(1e-15));

  // A uniformly negative critic yields a negative normalizer: the sign is
  // reported, not stripped.
  QEnsemble neg = ens;
  neg.q1.values.back() = -100.0;
  neg.q2.values.back() = -100.0;
  CHECK(q_normalizer(data, neg) < 0.0);
}

TEST_CASE("in-sample masks union the one-hot actions per state") {
  Dataset data = stitch::dataset();
  auto masks = in_sample_action_masks(data);

  // Independent union over the dataset.
  std::map<Vec, Vec> expected;
  for (const auto& traj : data.trajectories) {
    for (int t = 0; t < traj.length(); ++t) {
      Vec& m = expected[traj.states[t]];
      if (m.empty()) m.assign(data.action_dim, 0.0);
      for (int d = 0; d < data.action_dim; ++d)
        if (traj.actions[t][d] != 0.0) m[d] = 1.0;
    }
  }
  CHECK(masks == expected);
  for (const auto& [state, mask] : masks) {
    double bits = 0.0;
    for (double b : mask) {
      CHECK((b == 0.0 || b == 1.0));
      bits += b;
    }
    CHECK(bits >= 1.0);  // every visited state has at least one logged action
  }
}

TEST_CASE("the loss matches a by-hand evaluation on one window") {
  PolicySpec spec;
  spec.context_len = 1;
  spec.hidden = {5};
  spec.state_dim = 2;
  spec.action_dim = 2;
  ParamSet p = net_init(spec.net_spec(), 3);
  QEnsemble ens = make_ensemble(2, 2, {4}, 8);

  Vec state = {0.4, -0.2};
  Vec target = {0.3, 0.8};
  std::vector<WindowSample> batch = {
      make_sample({state}, {target}, {1}, {{0.6}}, 2.0)};
  VcsWeightFn fn{1.5, 4.0, 0.0};  // w = 1.5 * (4 - 2) = 3
  double q_norm = 2.0;

  Vec input = policy_input(spec, batch[0], 0);
  Vec pi = forward(p, spec.net_spec(), input);
  double bc = 0.0;
  for (int d = 0; d < 2; ++d) bc += (pi[d] - target[d]) * (pi[d] - target[d]);
  Vec sa = state;
  sa.insert(sa.end(), pi.begin(), pi.end());
  double minq = std::min(forward(ens.q1, ens.spec, sa)[0],
                         forward(ens.q2, ens.spec, sa)[0]);
  double aid = -(3.0 / q_norm) * minq;

  LossResult res = vcs_loss(p, spec, batch, ens, fn, q_norm, true, AidDomain::Raw);
  CHECK(res.bc_term == doctest::Approx(bc).epsilon(1e-14));
  CHECK(res.aid_term == doctest::Approx(aid).epsilon(1e-14));
  CHECK(res.loss == doctest::Approx(bc + aid).epsilon(1e-14));

  LossResult bare = vcs_loss(p, spec, batch, ens, fn, q_norm, false, AidDomain::Raw);
  CHECK(bare.bc_term == 0.0);
  CHECK(bare.loss == doctest::Approx(aid).epsilon(1e-14));

  // Doubling the normalizer halves the aid term and leaves BC alone.
  LossResult half = vcs_loss(p, spec, batch, ens, fn, 2.0 * q_norm, true,
                             AidDomain::Raw);
  CHECK(half.aid_term == doctest::Approx(0.5 * aid).epsilon(1e-12));
  CHECK(half.bc_term == res.bc_term);
}

TEST_CASE("loss gradients match finite differences in every aid domain") {
  PolicySpec spec;
  spec.context_len = 2;
  spec.hidden = {5};
  spec.state_dim = 2;
  spec.action_dim = 3;
  QEnsemble ens = make_ensemble(2, 3, {6}, 17);
  VcsWeightFn fn{1.0, 2.0, 0.1};

  SUBCASE("raw") {
    check_gradient(spec, fd_batch(false), ens, fn, 1.3, true,
                   AidDomain::Raw, 5);
  }
  SUBCASE("raw without the bc term") {
    check_gradient(spec, fd_batch(false), ens, fn, 1.3, false,
                   AidDomain::Raw, 6);
  }
  SUBCASE("simplex") {
    check_gradient(spec, fd_batch(false), ens, fn, 0.7, true,
                   AidDomain::Simplex, 7);
  }
  SUBCASE("simplex with coordinate masks") {
    check_gradient(spec, fd_batch(true), ens, fn, 0.7, true,
                   AidDomain::Simplex, 8);
  }
  SUBCASE("box") {
    check_gradient(spec, fd_batch(false), ens, fn, 1.1, true,
                   AidDomain::Box, 9);
  }
  SUBCASE("negative normalizer") {
    check_gradient(spec, fd_batch(false), ens, fn, -0.9, true,
                   AidDomain::Raw, 10);
  }
}

TEST_CASE("box and raw domains agree while outputs stay inside the box") {
  PolicySpec spec;
  spec.context_len = 1;
  spec.hidden = {4};
  spec.state_dim = 2;
  spec.action_dim = 2;
  ParamSet p = net_init(spec.net_spec(), 12);  // small init: |pi| < 1
  QEnsemble ens = make_ensemble(2, 2, {4}, 13);
  std::vector<WindowSample> batch = {
      make_sample({{0.3, 0.3}}, {{0.1, -0.1}}, {1}, {{1.0}}, 0.0)};
  VcsWeightFn fn{1.0, 3.0, 0.0};

  Vec pi = forward(p, spec.net_spec(), policy_input(spec, batch[0], 0));
  for (double x : pi) REQUIRE(std::fabs(x) < 1.0);

  LossResult raw = vcs_loss(p, spec, batch, ens, fn, 1.0, true, AidDomain::Raw);
  LossResult box = vcs_loss(p, spec, batch, ens, fn, 1.0, true, AidDomain::Box);
  CHECK(raw.loss == box.loss);
  CHECK(raw.grad == box.grad);
}

TEST_CASE("degenerate loss inputs are rejected") {
  PolicySpec spec;
  spec.context_len = 1;
  spec.hidden = {4};
  spec.state_dim = 2;
  spec.action_dim = 2;
  ParamSet p = net_init(spec.net_spec(), 1);
  QEnsemble ens = make_ensemble(2, 2, {4}, 2);
  VcsWeightFn fn{1.0, 1.0, 0.0};
  std::vector<WindowSample> batch = {
      make_sample({{0.1, 0.1}}, {{0.0, 0.0}}, {1}, {{0.5}}, 0.0)};

  std::vector<WindowSample> empty;
  CHECK_THROWS_AS(vcs_loss(p, spec, empty, ens, fn, 1.0, true, AidDomain::Raw),
                  DimensionError&);
  CHECK_THROWS_AS(vcs_loss(p, spec, batch, ens, fn, 0.0, true, AidDomain::Raw),
                  ConfigError&);
  std::vector<WindowSample> all_padding = {
      make_sample({{0.1, 0.1}}, {{0.0, 0.0}}, {0}, {{0.5}}, 0.0)};
  CHECK_THROWS_AS(
      vcs_loss(p, spec, all_padding, ens, fn, 1.0, true, AidDomain::Raw),
      DimensionError&);
}

TEST_CASE("training config validation rejects bad values") {
  VcsConfig ok;
  CHECK_NOTHROW(ok.validate());
  VcsConfig c;

  SUBCASE("context length") { c.context_len = 0; }
  SUBCASE("negative lambda") { c.lambda = -0.1; }
  SUBCASE("negative floor") { c.weight_floor = -1.0; }
  SUBCASE("no steps") { c.gradient_steps = 0; }
  SUBCASE("zero lr") { c.lr = 0.0; }
  SUBCASE("zero batch") { c.batch_size = 0; }
  SUBCASE("negative weight decay") { c.weight_decay = -1e-9; }
  SUBCASE("no hidden layers") { c.hidden = {}; }
  SUBCASE("no rtg multipliers") { c.rtg_multipliers = {}; }
  SUBCASE("negative checkpoint interval") { c.checkpoint_interval = -1; }

  CHECK_THROWS_AS(c.validate(), ConfigError&);
}

TEST_CASE("zero-weight training reduces to behavior cloning bitwise") {
  Dataset data = stitch::dataset();
  QEnsemble ens = make_ensemble(data.state_dim, data.action_dim, {8}, 4);

  VcsConfig cfg;
  cfg.context_len = 1;
  cfg.lambda = 0.0;
  cfg.weight_floor = 0.0;
  cfg.gradient_steps = 40;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 10;
  cfg.batch_size = 8;
  cfg.hidden = {8};
  cfg.checkpoint_interval = 0;
  cfg.seed = 3;

  PolicyResult rcsl = train_policy(data, ens, cfg, PolicyObjective::RcslOnly);
  PolicyResult vcs0 = train_policy(data, ens, cfg, PolicyObjective::Vcs);
  CHECK(param_hash(rcsl.policy) == param_hash(vcs0.policy));
  CHECK(rcsl.loss_history == vcs0.loss_history);
}

TEST_CASE("the critic is frozen throughout policy training") {
  Dataset data = stitch::dataset();
  QEnsemble ens = make_ensemble(data.state_dim, data.action_dim, {8}, 4);
  std::uint64_t before = param_hash(ens.q1) ^ param_hash(ens.q2) ^
                         param_hash(ens.q1_target) ^ param_hash(ens.q2_target);

  VcsConfig cfg;
  cfg.context_len = 1;
  cfg.lambda = 1.0;
  cfg.gradient_steps = 30;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 5;
  cfg.batch_size = 8;
  cfg.hidden = {8};
  cfg.checkpoint_interval = 0;
  cfg.aid_domain = AidDomain::Simplex;
  cfg.seed = 0;
  train_policy(data, ens, cfg, PolicyObjective::Vcs);

  std::uint64_t after = param_hash(ens.q1) ^ param_hash(ens.q2) ^
                        param_hash(ens.q1_target) ^ param_hash(ens.q2_target);
  CHECK(before == after);
}

TEST_CASE("checkpoints land on the interval and end with the final params") {
  Dataset data = stitch::dataset();
  QEnsemble ens = make_ensemble(data.state_dim, data.action_dim, {8}, 4);
  VcsConfig cfg;
  cfg.context_len = 1;
  cfg.gradient_steps = 10;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 2;
  cfg.batch_size = 4;
  cfg.hidden = {6};
  cfg.seed = 1;

  SUBCASE("interval divides the step count") {
    cfg.checkpoint_interval = 5;
    PolicyResult res = train_policy(data, ens, cfg, PolicyObjective::RcslOnly);
    REQUIRE(res.checkpoints.size() == 2);
    CHECK(param_hash(res.checkpoints.back()) == param_hash(res.policy));
  }
  SUBCASE("a trailing checkpoint captures the leftover steps") {
    cfg.checkpoint_interval = 4;
    PolicyResult res = train_policy(data, ens, cfg, PolicyObjective::RcslOnly);
    REQUIRE(res.checkpoints.size() == 3);  // steps 4, 8 and the final state
    CHECK(param_hash(res.checkpoints.back()) == param_hash(res.policy));
    CHECK(param_hash(res.checkpoints[0]) != param_hash(res.policy));
  }
  SUBCASE("interval zero disables checkpointing") {
    cfg.checkpoint_interval = 0;
    PolicyResult res = train_policy(data, ens, cfg, PolicyObjective::RcslOnly);
    CHECK(res.checkpoints.empty());
  }
}

TEST_CASE("policy snapshots round trip through disk") {
  Dataset data = stitch::dataset();
  QEnsemble ens = make_ensemble(data.state_dim, data.action_dim, {8}, 4);
  VcsConfig cfg;
  cfg.context_len = 2;
  cfg.mode = CondMode::Rtg;
  cfg.lambda = 2.5;
  cfg.weight_floor = 0.25;
  cfg.gradient_steps = 8;
  cfg.lr = 1e-3;
  cfg.warmup_steps = 2;
  cfg.batch_size = 4;
  cfg.hidden = {6};
  cfg.rtg_multipliers = {1.0, 0.5};
  cfg.checkpoint_interval = 4;
  cfg.aid_domain = AidDomain::Simplex;
  cfg.seed = 9;
  PolicyResult res = train_policy(data, ens, cfg, PolicyObjective::Vcs);

  std::string dir = "test_policy_snapshot_dir";
  save_policy(dir, res, cfg, PolicyObjective::Vcs, data.r_star, "cafe0123");
  LoadedPolicy loaded = load_policy(dir);

  CHECK(loaded.spec.context_len == 2);
  CHECK(loaded.spec.mode == CondMode::Rtg);
  CHECK(loaded.spec.state_dim == data.state_dim);
  CHECK(loaded.spec.action_dim == data.action_dim);
  CHECK(param_hash(loaded.policy) == param_hash(res.policy));
  REQUIRE(loaded.checkpoints.size() == res.checkpoints.size());
  for (std::size_t i = 0; i < res.checkpoints.size(); ++i)
    CHECK(param_hash(loaded.checkpoints[i]) == param_hash(res.checkpoints[i]));
  CHECK(loaded.cfg.lambda == 2.5);
  CHECK(loaded.cfg.weight_floor == 0.25);
  CHECK(loaded.cfg.rtg_multipliers == cfg.rtg_multipliers);
  CHECK(loaded.cfg.aid_domain == AidDomain::Simplex);
  CHECK(loaded.objective == PolicyObjective::Vcs);
  CHECK(loaded.r_star == data.r_star);
  CHECK(loaded.critic_hash == "cafe0123");

  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_policy(dir), IoError&);
}
