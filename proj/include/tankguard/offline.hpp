#pragma once

#include <algorithm>
#include <vector>

#include "tankguard/replay.hpp"
#include "tankguard/sac.hpp"
#include "tankguard/sim.hpp"

namespace tankguard {

// Offline phase: collect random-interaction tuples around the maze, then
// pretrain the safety critic + recovery policy on them before any task
// training sees the robot.

struct CollectStats {
  size_t tuples = 0;
  size_t episodes = 0;
  size_t force_violations = 0;
  size_t budget_violations = 0;
  size_t flow_violations = 0;
  size_t successes = 0;
  double violation_rate() const {
    return tuples ? static_cast<double>(force_violations + budget_violations + flow_violations) /
                        static_cast<double>(tuples)
                  : 0.0;
  }
};

// Random actions executed from rotating spawn poses. Episodes are cut at
// `episode_cap` decisions (cap cuts are not terminal for bootstrapping);
// the mask records the conditions the run config actually enforces.
inline std::vector<Transition> collect_offline(const MazeSpec& maze, const SimParams& prm,
                                               const RunSetup& run, size_t n_tuples,
                                               uint64_t seed, CollectStats* stats = nullptr,
                                               int episode_cap = 40) {
  require(n_tuples > 0, "collect: need a positive tuple count");
  MazeEnv env(maze, prm, run);
  Rng act_rng(Rng::derive(seed, 11));
  std::vector<Transition> data;
  data.reserve(n_tuples);
  CollectStats st;
  const std::vector<Vec2> spawns =
      maze.spawn_points.empty() ? std::vector<Vec2>{maze.start} : maze.spawn_points;

  size_t episode = 0;
  while (data.size() < n_tuples) {
    const Vec2& spawn = spawns[episode % spawns.size()];
    Eigen::VectorXd obs = env.reset_at(spawn, Rng::derive(seed, 1000 + episode));
    ++episode;
    ++st.episodes;
    for (int step = 0; step < episode_cap && data.size() < n_tuples; ++step) {
      Eigen::Vector4d a_norm;
      for (int i = 0; i < kActDim; ++i) a_norm[i] = act_rng.uniform(-1.0, 1.0);
      const Eigen::Vector4d a_env = env_action(a_norm);
      const StepResult r = env.step(to_rl_action(a_env));

      Transition t;
      t.s = obs;
      t.a = a_env;
      t.r = r.reward;
      t.s2 = r.obs;
      t.done = r.done;
      if (run.constraints.force && r.flags.force) t.mask |= kMaskForce;
      if (run.constraints.budget && r.flags.tank) t.mask |= kMaskBudget;
      if (run.constraints.flow && r.flags.flow) t.mask |= kMaskFlow;
      data.push_back(t);

      st.force_violations += (t.mask & kMaskForce) ? 1 : 0;
      st.budget_violations += (t.mask & kMaskBudget) ? 1 : 0;
      st.flow_violations += (t.mask & kMaskFlow) ? 1 : 0;
      st.successes += r.flags.success ? 1 : 0;
      obs = r.obs;
      if (r.done) break;
    }
  }
  st.tuples = data.size();
  if (stats) *stats = st;
  return data;
}

// Area under the ROC curve by the rank-sum formula (ties get average ranks).
inline double roc_auc(const std::vector<double>& scores, const std::vector<char>& labels) {
  require(scores.size() == labels.size() && !scores.empty(), "auc: bad input");
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t pos = 0, i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) {
        rank_sum_pos += avg_rank;
        ++pos;
      }
    i = j + 1;
  }
  const size_t neg = scores.size() - pos;
  require(pos > 0 && neg > 0, "auc: need both classes");
  return (rank_sum_pos - 0.5 * static_cast<double>(pos) * (pos + 1)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

struct PretrainReport {
  size_t n_train = 0, n_held_out = 0;
  size_t train_violations = 0, held_out_violations = 0;
  double auc = 0.0;
  std::vector<double> critic_loss;  // per epoch
  bool degenerate = false;          // too few violation examples to learn from
};

// Train the safety pair on a fixed dataset. Every 10th tuple is held out for
// the AUC report; violation tuples are oversampled into each batch.
inline SafetyLearner pretrain_safety(const std::vector<Transition>& data, const SacConfig& cfg,
                                     uint64_t seed, int epochs, PretrainReport* report = nullptr) {
  require(!data.empty(), "pretrain: empty dataset");
  require(epochs > 0, "pretrain: epochs must be positive");
  SafetyLearner learner = SafetyLearner::init(cfg, seed);
  Rng rng(Rng::derive(seed, 21));

  std::vector<size_t> train, held;
  std::vector<size_t> train_vio;
  for (size_t i = 0; i < data.size(); ++i) {
    if (i % 10 == 9) {
      held.push_back(i);
    } else {
      if (is_violation(data[i])) train_vio.push_back(train.size());
      train.push_back(i);
    }
  }
  PretrainReport rep;
  rep.n_train = train.size();
  rep.n_held_out = held.size();
  rep.train_violations = train_vio.size();
  for (size_t i : held) rep.held_out_violations += is_violation(data[i]) ? 1 : 0;
  rep.degenerate = train_vio.size() < 2 || rep.held_out_violations == 0;

  const int b = cfg.batch;
  const int batches_per_epoch =
      std::max<int>(1, static_cast<int>(train.size()) / b);
  Matrix w(b, kWrenchDim), a(b, kActDim), w2(b, kWrenchDim);
  Eigen::VectorXd c(b), d(b);
  for (int e = 0; e < epochs; ++e) {
    double loss_sum = 0.0;
    for (int it = 0; it < batches_per_epoch; ++it) {
      for (int i = 0; i < b; ++i) {
        size_t idx;
        if (!train_vio.empty() && rng.uniform() < cfg.violation_fraction)
          idx = train[train_vio[rng.uniform_int(train_vio.size())]];
        else
          idx = train[rng.uniform_int(train.size())];
        const Transition& t = data[idx];
        w.row(i) = normalize_obs(t.s).head(kWrenchDim).transpose();
        w2.row(i) = normalize_obs(t.s2).head(kWrenchDim).transpose();
        a.row(i) = normalize_action(t.a).transpose();
        c[i] = is_violation(t) ? 1.0 : 0.0;
        d[i] = t.done ? 1.0 : 0.0;
      }
      loss_sum += learner.update(w, a, c, w2, d).critic;
    }
    rep.critic_loss.push_back(loss_sum / batches_per_epoch);
  }

  if (!held.empty() && !rep.degenerate) {
    std::vector<double> scores;
    std::vector<char> labels;
    for (size_t i : held) {
      const Transition& t = data[i];
      scores.push_back(
          learner.risk(normalize_obs(t.s).head(kWrenchDim), normalize_action(t.a)));
      labels.push_back(is_violation(t) ? 1 : 0);
    }
    rep.auc = roc_auc(scores, labels);
  }
  if (report) *report = rep;
  return learner;
}

}  // namespace tankguard
