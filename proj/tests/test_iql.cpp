#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vcs/envs.hpp"
#include "vcs/iql.hpp"

using namespace vcs;

TEST_CASE("expectile loss is the symmetric square at eta = 0.5") {
  for (double u : {-3.0, -0.25, 0.0, 0.1, 2.0}) {
    CHECK(expectile_loss(u, 0.5) == 0.5 * u * u);
    // Mirror identity; 1 - 0.7 is inexact in binary, so allow an ulp.
    CHECK(expectile_loss(-u, 0.7) ==
          doctest::Approx(expectile_loss(u, 1.0 - 0.7)).epsilon(1e-15));
  }
  CHECK(expectile_loss(2.0, 0.9) == doctest::Approx(0.9 * 4.0));
  CHECK(expectile_loss(-2.0, 0.9) == doctest::Approx(0.1 * 4.0));
}

TEST_CASE("expectile gradient matches finite differences away from zero") {
  for (double eta : {0.5, 0.7, 0.9}) {
    for (double u : {-1.5, -0.2, 0.3, 2.0}) {
      double h = 1e-7;
      double fd = (expectile_loss(u + h, eta) - expectile_loss(u - h, eta)) / (2 * h);
      CHECK(expectile_loss_grad(u, eta) == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK(expectile_loss_grad(0.0, eta) == 0.0);
  }
}

TEST_CASE("the fitted scalar expectile of a balanced 0/1 sample equals eta") {
  // Independent 1-d minimization: the estimator is the c minimizing
  // mean expectile_loss(y - c); for a balanced {0,1} sample the exact
  // minimizer is eta.
  for (double eta : {0.5, 0.7, 0.9}) {
    double c = 0.5;
    for (int it = 0; it < 4000; ++it) {
      double g = -0.5 * (expectile_loss_grad(1.0 - c, eta) +
                         expectile_loss_grad(0.0 - c, eta));
      c -= 0.05 * g;
    }
    CHECK(c == doctest::Approx(eta).epsilon(1e-4));
  }
}

TEST_CASE("ensemble construction wires four critics of one spec") {
  QEnsemble ens = make_ensemble(3, 2, {8, 8}, 17);
  CHECK(ens.spec.input_width() == 5);
  CHECK(ens.spec.output_width() == 1);
  CHECK(ens.q1.values.size() == ens.spec.param_count());
  CHECK(ens.q1.values != ens.q2.values);  // independent inits
  CHECK(ens.q1_target.values == ens.q1.values);
  CHECK(ens.q2_target.values == ens.q2.values);

  Vec sa = {0.1, -0.2, 0.3, 0.05, -0.4};
  double m = ens.min_q(sa);
  CHECK(m == std::min(forward(ens.q1, ens.spec, sa)[0],
                      forward(ens.q2, ens.spec, sa)[0]));
  CHECK(ens.target_min_q(sa) == m);  // targets start as copies
}

TEST_CASE("flatten_transitions carries rewards and terminal flags") {
  Dataset d = stitch::dataset();
  auto rows = flatten_transitions(d);
  REQUIRE(rows.size() == d.transition_count());
  std::size_t dones = 0;
  for (const auto& r : rows) {
    CHECK(r.state.size() == static_cast<std::size_t>(d.state_dim));
    CHECK(r.state_action.size() ==
          static_cast<std::size_t>(d.state_dim + d.action_dim));
    for (int i = 0; i < d.state_dim; ++i) CHECK(r.state_action[i] == r.state[i]);
    dones += r.done ? 1 : 0;
  }
  CHECK(dones == 2);  // one terminal per fixture trajectory
}

TEST_CASE("config validation rejects out-of-range values") {
  IqlConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SUBCASE("expectile") {
    cfg.expectile = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.expectile = 0.4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("discount") {
    cfg.discount = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("lr") {
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("weight_decay") {
    cfg.weight_decay = -1e-4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("hidden") {
    cfg.hidden = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("target networks obey the polyak switch") {
  Dataset d = stitch::dataset();
  IqlConfig cfg;
  cfg.gradient_steps = 40;
  cfg.batch_size = 6;
  cfg.hidden = {8};
  cfg.discount = 1.0;

  SUBCASE("frozen targets at rate 0") {
    cfg.target_rate = 0.0;
    QEnsemble init =
        make_ensemble(d.state_dim, d.action_dim, cfg.hidden, cfg.seed);
    IqlResult r = train_iql(d, cfg);
    CHECK(r.critics.q1.values != init.q1.values);  // online nets moved
    CHECK(r.critics.q1_target.values == init.q1_target.values);
    CHECK(r.critics.q2_target.values == init.q2_target.values);
  }
  SUBCASE("hard sync at rate 1") {
    cfg.target_rate = 1.0;
    IqlResult r = train_iql(d, cfg);
    CHECK(r.critics.q1_target.values == r.critics.q1.values);
    CHECK(r.critics.q2_target.values == r.critics.q2.values);
  }
}

TEST_CASE("training is reproducible and logs finite losses") {
  Dataset d = stitch::dataset();
  IqlConfig cfg;
  cfg.gradient_steps = 60;
  cfg.batch_size = 6;
  cfg.hidden = {8};
  IqlResult a = train_iql(d, cfg);
  IqlResult b = train_iql(d, cfg);
  CHECK(param_hash(a.critics.q1) == param_hash(b.critics.q1));
  CHECK(param_hash(a.v) == param_hash(b.v));
  CHECK(a.v_loss_history == b.v_loss_history);
  REQUIRE(a.v_loss_history.size() == 60);
  for (double l : a.v_loss_history) CHECK(std::isfinite(l));
  for (double l : a.q_loss_history) CHECK(std::isfinite(l));

  cfg.seed = 1;
  IqlResult c = train_iql(d, cfg);
  CHECK(param_hash(a.critics.q1) != param_hash(c.critics.q1));
}

TEST_CASE("critic snapshots round-trip through a directory") {
  Dataset d = stitch::dataset();
  IqlConfig cfg;
  cfg.gradient_steps = 30;
  cfg.batch_size = 6;
  cfg.hidden = {8};
  cfg.expectile = 0.8;
  cfg.weight_decay = 2e-4;
  IqlResult r = train_iql(d, cfg);

  std::string dir = "test_iql_snapshot.tmp";
  save_iql(dir, r, cfg, "deadbeef01234567");
  LoadedIql back = load_iql(dir);
  CHECK(back.critics.q1.values == r.critics.q1.values);
  CHECK(back.critics.q2.values == r.critics.q2.values);
  CHECK(back.critics.q1_target.values == r.critics.q1_target.values);
  CHECK(back.critics.q2_target.values == r.critics.q2_target.values);
  CHECK(back.v.values == r.v.values);
  CHECK(back.critics.spec == r.critics.spec);
  CHECK(back.cfg.expectile == cfg.expectile);
  CHECK(back.cfg.weight_decay == cfg.weight_decay);
  CHECK(back.cfg.gradient_steps == cfg.gradient_steps);
  CHECK(back.dataset_hash == "deadbeef01234567");

  CHECK_THROWS_AS(load_iql("no_such_directory.tmp"), IoError);
  std::filesystem::remove_all(dir);
}
