#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vcs/eval.hpp"

using namespace vcs;

namespace {

// Fixed-reward line world: rewards ignore the action entirely, which pins
// every rollout statistic in advance.
class LineEnv : public Env {
 public:
  std::string id() const override { return "line"; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int horizon() const override { return 4; }

  Vec reset(Rng&) override {
    t_ = 0;
    return {0.0};
  }

  StepOut step(const Vec&) override {
    double reward = kRewards[t_];
    ++t_;
    return {{static_cast<double>(t_)}, reward, t_ >= horizon()};
  }

  Vec project_action(const Vec& raw) const override {
    Vec a = raw;
    for (double& x : a) x = std::clamp(x, -1.0, 1.0);
    return a;
  }

  static constexpr double kRewards[4] = {2.0, -1.0, 3.0, 5.0};

 private:
  int t_ = 0;
};

PolicySpec line_spec() {
  PolicySpec spec;
  spec.context_len = 1;
  spec.mode = CondMode::Rtg;
  spec.hidden = {3};
  spec.state_dim = 1;
  spec.action_dim = 1;
  return spec;
}

ScoreRegistry toy_registry() {
  ScoreRegistry reg;
  reg.refs["line"] = {0.0, 10.0, "hand picked"};
  reg.refs["toy"] = {10.0, 20.0, "hand picked"};
  return reg;
}

}  // namespace

TEST_CASE("rollout conditioners telescope down by observed rewards") {
  LineEnv env;
  PolicySpec spec = line_spec();
  ParamSet p = net_init(spec.net_spec(), 2);
  CondTarget target;
  target.target_rtg = 7.5;

  RolloutResult res = rollout_policy(p, spec, env, target, 0);
  CHECK(res.episode_return == 9.0);
  REQUIRE(res.rtg_trace.size() == 4);
  CHECK(res.rtg_trace[0] == 7.5);
  CHECK(res.rtg_trace[1] == 7.5 - 2.0);
  CHECK(res.rtg_trace[2] == 7.5 - 2.0 + 1.0);
  CHECK(res.rtg_trace[3] == 7.5 - 2.0 + 1.0 - 3.0);
  REQUIRE(res.visited.size() == 5);  // initial state plus one per step
  CHECK(res.visited.front() == Vec{0.0});
  CHECK(res.visited.back() == Vec{4.0});
}

TEST_CASE("rollouts reject mismatched policies and goals") {
  LineEnv env;
  PolicySpec spec = line_spec();
  ParamSet p = net_init(spec.net_spec(), 2);

  PolicySpec wide = spec;
  wide.state_dim = 3;
  ParamSet pw = net_init(wide.net_spec(), 2);
  CondTarget target;
  CHECK_THROWS_AS(rollout_policy(pw, wide, env, target, 0), DimensionError&);

  CondTarget subgoal;
  subgoal.mode = CondMode::Subgoal;
  subgoal.goal = {0.0};
  CHECK_THROWS_AS(rollout_policy(p, spec, env, subgoal, 0), ConfigError&);

  PolicySpec goal_spec = spec;
  goal_spec.mode = CondMode::Subgoal;
  ParamSet pg = net_init(goal_spec.net_spec(), 2);
  CondTarget bad_goal;
  bad_goal.mode = CondMode::Subgoal;
  bad_goal.goal = {0.0, 1.0};  // env states are one-dimensional
  CHECK_THROWS_AS(rollout_policy(pg, goal_spec, env, bad_goal, 0),
                  DimensionError&);
}

TEST_CASE("normalized scores anchor random at 0 and expert at 100") {
  ScoreRegistry reg = toy_registry();
  CHECK(normalized_score(10.0, "toy", reg) == 0.0);
  CHECK(normalized_score(20.0, "toy", reg) == 100.0);
  CHECK(normalized_score(15.0, "toy", reg) == 50.0);
  CHECK(normalized_score(5.0, "toy", reg) == -50.0);
  CHECK_THROWS_AS(normalized_score(1.0, "hopper", reg), ConfigError&);
}

TEST_CASE("score registries round trip through disk") {
  std::string path = "test_eval_registry.json";
  ScoreRegistry reg = toy_registry();
  save_registry(path, reg);
  ScoreRegistry loaded = load_registry(path);
  REQUIRE(loaded.refs.size() == 2);
  CHECK(loaded.refs.at("toy").random_score == 10.0);
  CHECK(loaded.refs.at("toy").expert_score == 20.0);
  CHECK(loaded.refs.at("toy").provenance == "hand picked");
  CHECK(loaded.refs.at("line").expert_score == 10.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_registry("no_such_registry.json"), IoError&);

  std::string bad = "test_eval_registry_bad.json";
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_registry(bad), ConfigError&);
  {
    std::ofstream out(bad);
    out << R"({"toy": {"random": 5.0, "expert": 1.0}})";  // expert <= random
  }
  CHECK_THROWS_AS(load_registry(bad), ConfigError&);
  {
    std::ofstream out(bad);
    out << R"({"toy": {"random": 0.0, "expert": 1.0, "extra": 2}})";
  }
  CHECK_THROWS_AS(load_registry(bad), ConfigError&);
  std::remove(bad.c_str());
}

TEST_CASE("eval config validation rejects degenerate sweeps") {
  EvalConfig ok;
  CHECK_NOTHROW(ok.validate());
  EvalConfig c;

  SUBCASE("no episodes") { c.episodes_per_checkpoint = 0; }
  SUBCASE("no interval") { c.checkpoint_interval = 0; }
  SUBCASE("no window") { c.running_window = 0; }
  SUBCASE("no seeds") { c.seeds = {}; }
  SUBCASE("no multipliers") { c.rtg_multipliers = {}; }

  CHECK_THROWS_AS(c.validate(), ConfigError&);
}

TEST_CASE("evaluation needs at least a full running window of checkpoints") {
  LineEnv env;
  PolicySpec spec = line_spec();
  std::vector<ParamSet> checkpoints = {net_init(spec.net_spec(), 0)};
  EvalConfig cfg;
  cfg.running_window = 2;
  CHECK_THROWS_AS(
      evaluate_run(checkpoints, spec, env, cfg, toy_registry(), 9.0),
      MissingCheckpointsError&);
}

TEST_CASE("a constant-return environment is an evaluation fixed point") {
  LineEnv env;
  PolicySpec spec = line_spec();
  std::vector<ParamSet> checkpoints = {net_init(spec.net_spec(), 0),
                                       net_init(spec.net_spec(), 1),
                                       net_init(spec.net_spec(), 2)};
  EvalConfig cfg;
  cfg.episodes_per_checkpoint = 2;
  cfg.running_window = 2;
  cfg.seeds = {0, 1};
  cfg.rtg_multipliers = {1.0, 2.0};

  // Every rollout earns 9 regardless of the policy, i.e. 90 normalized.
  EvalReport rep = evaluate_run(checkpoints, spec, env, cfg, toy_registry(), 9.0);
  CHECK(rep.env_id == "line");
  CHECK(rep.base_target == 9.0);
  REQUIRE(rep.curves.size() == 2);
  for (const auto& curve : rep.curves) {
    REQUIRE(curve.size() == 3);
    for (double v : curve) CHECK(v == doctest::Approx(90.0).epsilon(1e-12));
  }
  REQUIRE(rep.per_seed_final.size() == 2);
  for (const auto& finals : rep.per_seed_final) {
    REQUIRE(finals.size() == 2);
    for (double v : finals) CHECK(v == doctest::Approx(90.0).epsilon(1e-12));
  }
  for (double v : rep.final_per_multiplier)
    CHECK(v == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(rep.best_final == doctest::Approx(90.0).epsilon(1e-12));
  CHECK_FALSE(rep.sample_episodes.empty());
  for (const auto& ep : rep.sample_episodes)
    for (const Vec& s : ep) CHECK(s.size() == 1);

  nlohmann::json doc = nlohmann::json::parse(eval_report_json(rep));
  CHECK(doc.at("env").get<std::string>() == "line");
  CHECK(doc.at("best_final").get<double>() == rep.best_final);
  CHECK(doc.at("curves").size() == 2);
}

TEST_CASE("visited-state csv lists episode and step indices") {
  std::vector<std::vector<Vec>> episodes = {
      {{0.0, 0.5}, {1.0, -0.5}},
      {{0.25, 0.25}},
  };
  std::ostringstream out;
  write_visited_csv(out, episodes);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "episode,step,s0,s1");
  std::getline(in, line);
  CHECK(line == "0,0,0,0.5");
  std::getline(in, line);
  CHECK(line == "0,1,1,-0.5");
  std::getline(in, line);
  CHECK(line == "1,0,0.25,0.25");
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("score curves render to a well-formed svg") {
  EvalReport rep;
  rep.env_id = "line";
  rep.multipliers = {1.0, 2.0};
  rep.curves = {{10.0, 40.0, 80.0}, {5.0, 20.0, 60.0}};
  std::ostringstream out;
  write_curves_svg(out, rep);
  std::string svg = out.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}
