#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "tankguard/offline.hpp"
#include "tankguard/sac.hpp"

using namespace tankguard;

static const std::string kMazeDir = std::string(TG_SOURCE_DIR) + "/data/mazes/";
static const std::string kTmp = std::string(TG_BINARY_DIR) + "/test_tmp/";

static SacConfig tiny_cfg() {
  SacConfig c;
  c.hidden = {16, 16};
  c.batch = 8;
  c.warmup_steps = 0;
  return c;
}

static Eigen::VectorXd obs_of(double fx, double px) {
  Eigen::VectorXd o = Eigen::VectorXd::Zero(kObsDim);
  o[0] = fx;
  o[6] = px;
  return o;
}

TEST_CASE("action normalization round-trips and maps bounds to bounds") {
  const Eigen::Vector4d lo = env_action(Eigen::Vector4d(-1, -1, -1, -1));
  CHECK(lo[0] == -0.03);
  CHECK(lo[2] == 300.0);
  const Eigen::Vector4d hi = env_action(Eigen::Vector4d(1, 1, 1, 1));
  CHECK(hi[1] == 0.03);
  CHECK(hi[3] == 1000.0);
  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector4d n;
    for (int k = 0; k < 4; ++k) n[k] = rng.uniform(-1.0, 1.0);
    const Eigen::Vector4d back = normalize_action(env_action(n));
    CHECK((back - n).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("critic fixed point on a single terminal transition is zero") {
  SacAgent agent(tiny_cfg(), 71);
  ReplayBuffer buf(16);
  Transition t;
  t.s = obs_of(0.0, 0.1);
  t.s2 = obs_of(0.0, 0.12);
  t.a = env_action(Eigen::Vector4d(0.3, -0.2, 0.1, 0.4));
  t.r = 0.0;
  t.done = true;  // bootstrap cut: target is exactly r = 0
  buf.push(t);
  for (int i = 0; i < 800; ++i) agent.update(buf);
  const double q = agent.q_value(t.s, normalize_action(t.a));
  CHECK(std::abs(q) < 0.05);
}

TEST_CASE("actions respect the box and exploration is seeded") {
  SacAgent a1(tiny_cfg(), 77), a2(tiny_cfg(), 77), a3(tiny_cfg(), 78);
  const Eigen::VectorXd obs = obs_of(5.0, 0.2);
  for (int i = 0; i < 50; ++i) {
    const ActionChoice c = a1.act(obs, true);
    CHECK(std::abs(c.act.dp[0]) <= 0.03);
    CHECK(std::abs(c.act.dp[1]) <= 0.03);
    CHECK(c.act.k1 >= 300.0);
    CHECK(c.act.k1 <= 1000.0);
    CHECK(c.act.k2 >= 300.0);
    CHECK(c.act.k2 <= 1000.0);
  }
  // Same seed, same stream.
  const ActionChoice c2 = a2.act(obs, true);
  SacAgent a4(tiny_cfg(), 77);
  const ActionChoice c4 = a4.act(obs, true);
  CHECK(c2.a_norm == c4.a_norm);
  // Different seed diverges; deterministic mean ignores the noise stream.
  CHECK(a3.act(obs, true).a_norm != c2.a_norm);
  const ActionChoice m1 = a1.act(obs, false), m2 = a1.act(obs, false);
  CHECK(m1.a_norm == m2.a_norm);
}

TEST_CASE("risk gate swaps in the recovery action above threshold") {
  SacConfig cfg = tiny_cfg();
  cfg.safety_enabled = true;
  cfg.eps_risk = 0.65;
  SacAgent agent(cfg, 80);
  const Eigen::VectorXd obs = obs_of(10.0, 0.1);

  // Force the safety critic to a huge constant via its last-layer bias.
  auto& critic = agent.safety().critic_mut();
  std::fill(critic.params().begin(), critic.params().end(), 0.0);
  critic.params().back() = 100.0;  // output bias
  ActionChoice c = agent.act(obs, false);
  CHECK(c.intervened);
  CHECK(c.q_risk == 1.0);  // clamped at use
  const Eigen::Vector4d rec =
      agent.safety().recovery_action(normalize_obs(obs).head(kWrenchDim));
  CHECK(c.a_norm == rec);

  // And a tiny constant never triggers it.
  critic.params().back() = -100.0;
  c = agent.act(obs, false);
  CHECK_FALSE(c.intervened);
  CHECK(c.q_risk == 0.0);
}

TEST_CASE("safety learner separates risky from safe on synthetic data") {
  SacConfig cfg = tiny_cfg();
  cfg.hidden = {32, 32};
  cfg.batch = 64;
  SafetyLearner learner = SafetyLearner::init(cfg, 90);
  Rng rng(91);
  // Rule: cost = 1 iff normalized wrench x + half the first action coordinate
  // is large. done everywhere, so the target is the label itself.
  Matrix w(64, kWrenchDim), a(64, kActDim), w2 = Matrix::Zero(64, kWrenchDim);
  Eigen::VectorXd c(64), d = Eigen::VectorXd::Ones(64);
  for (int it = 0; it < 400; ++it) {
    for (int i = 0; i < 64; ++i) {
      w.row(i).setZero();
      w(i, 0) = rng.uniform(-1.0, 1.0);
      for (int k = 0; k < kActDim; ++k) a(i, k) = rng.uniform(-1.0, 1.0);
      c[i] = (w(i, 0) + 0.5 * a(i, 0) > 0.8) ? 1.0 : 0.0;
    }
    learner.update(w, a, c, w2, d);
  }
  Eigen::VectorXd hot = Eigen::VectorXd::Zero(kWrenchDim);
  hot[0] = 0.95;
  Eigen::VectorXd cold = Eigen::VectorXd::Zero(kWrenchDim);
  cold[0] = -0.5;
  const Eigen::Vector4d push(0.9, 0.0, 0.0, 0.0), pull(-0.9, 0.0, 0.0, 0.0);
  CHECK(learner.risk(hot, push) > 0.6);
  CHECK(learner.risk(cold, pull) < 0.3);
  CHECK(learner.risk(hot, push) > learner.risk(hot, pull));
}

TEST_CASE("auc matches hand-computed values") {
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75));
  CHECK(roc_auc({0.0, 0.1, 0.9, 1.0}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.9, 1.0, 0.0, 0.1}, {0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc({0.5, 0.5}, {1, 0}) == Catch::Approx(0.5));  // ties: average rank
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), std::invalid_argument);
}

TEST_CASE("offline collection is reproducible and labels violations") {
  std::filesystem::create_directories(kTmp);
  const MazeSpec maze = load_maze(kMazeDir + "s_maze.json");
  SimParams prm;
  RunSetup run;  // force-only termination, layer off
  CollectStats st;
  const auto data = collect_offline(maze, prm, run, 1500, 123, &st);
  CHECK(data.size() == 1500);
  CHECK(st.tuples == 1500);
  CHECK(st.episodes > 30);
  CHECK(st.force_violations > 0);
  // Random flailing against walls: a few percent of tuples end in collision.
  CHECK(st.violation_rate() > 0.005);
  CHECK(st.violation_rate() < 0.2);
  for (const auto& t : data) {
    REQUIRE(t.s.size() == kObsDim);
    REQUIRE(t.s2.size() == kObsDim);
  }
  // Bitwise reproducibility through the binary format.
  const auto again = collect_offline(maze, prm, run, 1500, 123);
  save_dataset_binary(data, kTmp + "col_a.bin");
  save_dataset_binary(again, kTmp + "col_b.bin");
  CHECK(read_file(kTmp + "col_a.bin") == read_file(kTmp + "col_b.bin"));
  // Different seed, different data.
  const auto other = collect_offline(maze, prm, run, 1500, 124);
  save_dataset_binary(other, kTmp + "col_c.bin");
  CHECK(read_file(kTmp + "col_a.bin") != read_file(kTmp + "col_c.bin"));
}

TEST_CASE("pretraining reaches high AUC on separable data and flags degenerate sets") {
  Rng rng(95);
  std::vector<Transition> data;
  for (int i = 0; i < 3000; ++i) {
    Transition t;
    t.s = Eigen::VectorXd::Zero(kObsDim);
    t.s2 = Eigen::VectorXd::Zero(kObsDim);
    t.s[0] = rng.uniform(-40.0, 40.0);
    Eigen::Vector4d an;
    for (int k = 0; k < 4; ++k) an[k] = rng.uniform(-1.0, 1.0);
    t.a = env_action(an);
    t.done = true;
    t.mask = (t.s[0] / 40.0 + 0.5 * an[0] > 0.8) ? kMaskForce : 0;
    data.push_back(t);
  }
  SacConfig cfg = tiny_cfg();
  cfg.hidden = {32, 32};
  cfg.batch = 64;
  PretrainReport rep;
  pretrain_safety(data, cfg, 96, 15, &rep);
  CHECK(rep.n_train == 2700);
  CHECK(rep.n_held_out == 300);
  CHECK_FALSE(rep.degenerate);
  CHECK(rep.auc > 0.9);
  CHECK(rep.critic_loss.size() == 15);
  CHECK(rep.critic_loss.back() < rep.critic_loss.front());

  // All-safe data cannot train a discriminator.
  for (auto& t : data) t.mask = 0;
  pretrain_safety(data, cfg, 96, 1, &rep);
  CHECK(rep.degenerate);
}

TEST_CASE("agent checkpoints restore the policy exactly") {
  std::filesystem::create_directories(kTmp);
  SacConfig cfg = tiny_cfg();
  cfg.safety_enabled = true;
  SacAgent agent(cfg, 99);
  // Push it away from init so the save isn't trivially fresh.
  ReplayBuffer buf(64);
  Rng rng(100);
  for (int i = 0; i < 32; ++i) {
    Transition t;
    t.s = obs_of(rng.normal() * 5.0, rng.uniform(0.0, 0.4));
    t.s2 = obs_of(rng.normal() * 5.0, rng.uniform(0.0, 0.4));
    t.a = env_action(Eigen::Vector4d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                                     rng.uniform(-1, 1)));
    t.r = rng.normal();
    t.done = i % 7 == 0;
    t.mask = i % 11 == 0 ? kMaskForce : 0;
    buf.push(t);
  }
  for (int i = 0; i < 20; ++i) agent.update(buf);

  const std::string dir = kTmp + "ckpt";
  agent.save(dir);
  SacAgent loaded(cfg, 1234);  // different init seed: everything overwritten
  loaded.load(dir);
  const Eigen::VectorXd obs = obs_of(3.0, 0.25);
  CHECK(loaded.act(obs, false).a_norm == agent.act(obs, false).a_norm);
  CHECK(loaded.temperature() == agent.temperature());
  const Eigen::Vector4d an(0.1, 0.2, -0.3, 0.4);
  CHECK(loaded.q_value(obs, an) == agent.q_value(obs, an));
  CHECK(loaded.safety().risk(normalize_obs(obs).head(kWrenchDim), an) ==
        agent.safety().risk(normalize_obs(obs).head(kWrenchDim), an));
}

TEST_CASE("training smoke run stays finite and deterministic") {
  const MazeSpec maze = load_maze(kMazeDir + "corridor.json");
  SimParams prm;
  prm.step_limit = 40;
  RunSetup run;
  run.layer_on = true;
  auto run_once = [&]() {
    MazeEnv env(maze, prm, run);
    SacConfig cfg = tiny_cfg();
    cfg.batch = 16;
    SacAgent agent(cfg, 7);
    ReplayBuffer buf(5000);
    double ret = 0.0;
    for (int ep = 0; ep < 6; ++ep) {
      Eigen::VectorXd obs = env.reset(Rng::derive(7, ep));
      while (!env.done()) {
        const ActionChoice c = buf.size() < 64 ? agent.random_action() : agent.act(obs, true);
        const StepResult r = env.step(c.act);
        Transition t;
        t.s = obs;
        t.a = env_action(c.a_norm);
        t.r = r.reward;
        t.s2 = r.obs;
        t.done = r.done;
        buf.push(t);
        obs = r.obs;
        ret += r.reward;
        if (buf.size() >= 64) {
          const UpdateLosses l = agent.update(buf);
          REQUIRE(std::isfinite(l.q1));
          REQUIRE(std::isfinite(l.actor));
          REQUIRE(std::isfinite(l.alpha));
          REQUIRE(l.temperature > 0.0);
        }
      }
    }
    return ret;
  };
  const double a = run_once();
  const double b = run_once();
  CHECK(a == b);
}
