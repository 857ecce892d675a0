#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tankguard/config.hpp"
#include "tankguard/offline.hpp"
#include "tankguard/sac.hpp"
#include "tankguard/sim.hpp"

namespace tankguard {

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io: cannot write " + path);
  out << text;
}

// Wall-clock and host facts live here and only here; every CSV and weight
// file must be bit-identical across reruns of the same config+seed.
inline void write_meta_json(const std::string& path, const HarnessConfig& cfg,
                            const std::string& maze_json, const std::string& kind,
                            double wall_seconds) {
  nlohmann::json j;
  j["kind"] = kind;
  j["config_hash"] = hex64(config_hash(cfg, maze_json));
  j["seed"] = cfg.seed;
  j["run_config"] = cfg.run_config;
  j["layer"] = cfg.layer_on ? "on" : "off";
  j["wall_seconds"] = wall_seconds;
  j["written_at"] = static_cast<long long>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io: cannot write " + path);
  out << j.dump(2) << "\n";
}

struct EpisodeStats {
  int episode = 0;
  uint64_t ep_seed = 0;
  int steps = 0;
  double ret = 0.0;
  bool success = false;
  bool v_force = false, v_tank = false, v_flow = false;
  double tank_end = 0.0;
  double energy_spent = 0.0;  // J drawn from the tank over the episode
  int interventions = 0;
  double sim_time = 0.0;
};

inline std::vector<std::string> episode_columns() {
  return {"episode",   "ep_seed",  "steps",        "return",        "success",
          "violated_force", "violated_tank", "violated_flow", "tank_end",
          "energy_spent",   "interventions", "sim_time"};
}

inline void write_episode_row(CsvWriter& w, const EpisodeStats& e) {
  w.line({cell(e.episode), std::to_string(e.ep_seed), cell(e.steps), cell(e.ret),
          cell(e.success), cell(e.v_force), cell(e.v_tank), cell(e.v_flow), cell(e.tank_end),
          cell(e.energy_spent), cell(e.interventions), cell(e.sim_time)});
}

// One policy decision applied through the env, with the bookkeeping every
// driver (train, eval, replay) shares.
struct StepOutcome {
  StepResult res;
  uint8_t mask = 0;
};

inline StepOutcome apply_action(MazeEnv& env, const RLAction& act) {
  StepOutcome o;
  o.res = env.step(act);
  const ConstraintSet& cs = env.run().constraints;
  if (cs.force && o.res.flags.force) o.mask |= kMaskForce;
  if (cs.budget && o.res.flags.tank) o.mask |= kMaskBudget;
  if (cs.flow && o.res.flags.flow) o.mask |= kMaskFlow;
  return o;
}

inline void accumulate(EpisodeStats& st, const StepOutcome& o, bool intervened,
                       double tank_before, double tank_after) {
  ++st.steps;
  st.ret += o.res.reward;
  st.success |= o.res.flags.success;
  st.v_force |= (o.mask & kMaskForce) != 0;
  st.v_tank |= (o.mask & kMaskBudget) != 0;
  st.v_flow |= (o.mask & kMaskFlow) != 0;
  if (intervened) ++st.interventions;
  if (tank_after < tank_before) st.energy_spent += tank_before - tank_after;
}

struct TrainResult {
  std::vector<EpisodeStats> episodes;
  long total_steps = 0;
  long total_updates = 0;
  double final_success_rate = 0.0;  // over the trailing 100 episodes
};

// On-policy training loop. Episode e spawns at spawn_points[e % n] (start
// pose if the maze lists none) so the replay buffer sees the whole maze.
inline TrainResult train_policy(const HarnessConfig& cfg, const MazeSpec& maze,
                                SacAgent& agent, const std::string& out_dir,
                                int checkpoint_every = 0) {
  const RunSetup run = make_run_setup(cfg);
  MazeEnv env(maze, cfg.sim, run);
  ReplayBuffer buf(cfg.agent.replay_capacity);
  const std::vector<Vec2> spawns =
      maze.spawn_points.empty() ? std::vector<Vec2>{maze.start} : maze.spawn_points;

  std::filesystem::create_directories(out_dir);
  CsvWriter log(out_dir + "/train_log.csv");
  log.comment("config_hash = " + hex64(config_hash(cfg, to_json(maze).dump())));
  log.comment("seed = " + std::to_string(cfg.seed));
  log.comment("run_config = " + cfg.run_config);
  log.comment("layer = " + std::string(cfg.layer_on ? "on" : "off"));
  log.comment("maze = " + maze.name);
  log.header(episode_columns());

  TrainResult result;
  for (int e = 0; e < cfg.episodes; ++e) {
    EpisodeStats st;
    st.episode = e;
    st.ep_seed = Rng::derive(cfg.seed, 1000 + static_cast<uint64_t>(e));
    Eigen::VectorXd obs = env.reset_at(spawns[static_cast<size_t>(e) % spawns.size()], st.ep_seed);
    while (!env.done()) {
      const bool warm = result.total_steps < cfg.agent.warmup_steps;
      const ActionChoice choice = warm ? agent.random_action() : agent.act(obs, true);
      const double tank_before = env.tank().energy;
      const StepOutcome o = apply_action(env, choice.act);
      buf.push(Transition{obs, env_action(choice.a_norm), o.res.reward, o.res.obs, o.res.done,
                          o.mask});
      accumulate(st, o, choice.intervened, tank_before, env.tank().energy);
      obs = o.res.obs;
      ++result.total_steps;
      if (result.total_steps >= cfg.agent.warmup_steps) {
        for (int u = 0; u < cfg.agent.updates_per_step; ++u) {
          agent.update(buf);
          ++result.total_updates;
        }
      }
    }
    st.tank_end = env.tank().energy;
    st.sim_time = env.sim_time();
    write_episode_row(log, st);
    result.episodes.push_back(st);
    if (checkpoint_every > 0 && (e + 1) % checkpoint_every == 0 && e + 1 < cfg.episodes) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "checkpoint_ep%05d", e + 1);
      agent.save(out_dir + "/" + tag);
    }
  }
  agent.save(out_dir + "/checkpoint");

  int wins = 0, window = 0;
  const size_t tail = result.episodes.size() > 100 ? result.episodes.size() - 100 : 0;
  for (size_t i = tail; i < result.episodes.size(); ++i) {
    ++window;
    wins += result.episodes[i].success ? 1 : 0;
  }
  result.final_success_rate = window ? static_cast<double>(wins) / window : 0.0;
  return result;
}

struct EvalSummary {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double mean_steps = 0.0;
  int force_violations = 0, tank_violations = 0, flow_violations = 0;
  double mean_tank_end = 0.0;
  double mean_energy_spent = 0.0;
  double intervention_rate = 0.0;  // fraction of decisions overridden
};

inline std::vector<std::string> eval_trace_columns() {
  return {"episode", "step", "tank_e", "k_eig1", "k_eig2"};
}

// Deterministic policy rollouts from the task start pose. Writes
// episodes.csv, summary.csv, budget_trace.csv (10 Hz tank + stiffness), and
// full per-tick logs for the first `cfg.log_episodes` episodes.
inline EvalSummary evaluate_policy(const HarnessConfig& cfg, const MazeSpec& maze,
                                   SacAgent& agent, const std::string& out_dir) {
  const RunSetup run = make_run_setup(cfg);
  MazeEnv env(maze, cfg.sim, run);
  std::filesystem::create_directories(out_dir);

  const std::string maze_json = to_json(maze).dump();
  const std::string hash = hex64(config_hash(cfg, maze_json));
  std::vector<std::string> meta = {"config_hash = " + hash,
                                   "seed = " + std::to_string(cfg.seed),
                                   "run_config = " + cfg.run_config,
                                   "layer = " + std::string(cfg.layer_on ? "on" : "off"),
                                   "maze = " + maze.name};

  CsvWriter eps(out_dir + "/episodes.csv");
  CsvWriter trace(out_dir + "/budget_trace.csv");
  for (const auto& m : meta) {
    eps.comment(m);
    trace.comment(m);
  }
  eps.header(episode_columns());
  trace.header(eval_trace_columns());

  EvalSummary sum;
  long decisions = 0, overrides = 0;
  for (int e = 0; e < cfg.eval_episodes; ++e) {
    EpisodeStats st;
    st.episode = e;
    st.ep_seed = Rng::derive(cfg.seed, 500000 + static_cast<uint64_t>(e));
    const bool tick_log = e < cfg.log_episodes;
    if (tick_log) {
      char name[32];
      std::snprintf(name, sizeof(name), "episode_%04d.csv", e);
      std::vector<std::string> em = meta;
      em.push_back("episode = " + std::to_string(e));
      em.push_back("episode_seed = " + std::to_string(st.ep_seed));
      em.push_back("spawn = " + fmt_double(maze.start[0]) + "," + fmt_double(maze.start[1]));
      env.start_log(out_dir + "/" + std::string(name), em);
    }
    Eigen::VectorXd obs = env.reset(st.ep_seed);
    while (!env.done()) {
      const ActionChoice choice = agent.act(obs, false);
      const double tank_before = env.tank().energy;
      const StepOutcome o = apply_action(env, choice.act);
      accumulate(st, o, choice.intervened, tank_before, env.tank().energy);
      obs = o.res.obs;
      const Vec2 eig = sym_eigenvalues(env.stiffness());
      trace.line({cell(e), cell(st.steps), cell(env.tank().energy), cell(eig[0]), cell(eig[1])});
      ++decisions;
      overrides += choice.intervened ? 1 : 0;
    }
    if (tick_log) env.stop_log();
    st.tank_end = env.tank().energy;
    st.sim_time = env.sim_time();
    write_episode_row(eps, st);

    sum.success_rate += st.success ? 1.0 : 0.0;
    sum.mean_return += st.ret;
    sum.mean_steps += st.steps;
    sum.force_violations += st.v_force ? 1 : 0;
    sum.tank_violations += st.v_tank ? 1 : 0;
    sum.flow_violations += st.v_flow ? 1 : 0;
    sum.mean_tank_end += st.tank_end;
    sum.mean_energy_spent += st.energy_spent;
  }
  sum.episodes = cfg.eval_episodes;
  if (sum.episodes > 0) {
    const double n = sum.episodes;
    sum.success_rate /= n;
    sum.mean_return /= n;
    sum.mean_steps /= n;
    sum.mean_tank_end /= n;
    sum.mean_energy_spent /= n;
  }
  sum.intervention_rate = decisions ? static_cast<double>(overrides) / decisions : 0.0;

  CsvWriter s(out_dir + "/summary.csv");
  for (const auto& m : meta) s.comment(m);
  s.header({"episodes", "success_rate", "mean_return", "mean_steps", "force_violations",
            "tank_violations", "flow_violations", "mean_tank_end", "mean_energy_spent",
            "intervention_rate"});
  s.line({cell(sum.episodes), cell(sum.success_rate), cell(sum.mean_return),
          cell(sum.mean_steps), cell(sum.force_violations), cell(sum.tank_violations),
          cell(sum.flow_violations), cell(sum.mean_tank_end), cell(sum.mean_energy_spent),
          cell(sum.intervention_rate)});
  return sum;
}

// --- replay verification ---------------------------------------------------

struct ReplayCheck {
  bool match = false;
  size_t lines_compared = 0;
  std::string mismatch;  // empty when match
};

// Re-executes the actions recorded in a per-tick episode log under the same
// config and seed, then compares the regenerated file byte-for-byte.
inline ReplayCheck replay_episode_file(const std::string& episode_csv, const HarnessConfig& cfg,
                                       const MazeSpec& maze, const std::string& regen_path) {
  const CsvTable t = load_csv(episode_csv);

  uint64_t ep_seed = 0;
  Vec2 spawn = maze.start;
  bool have_seed = false;
  for (const auto& c : t.comments) {
    const size_t eq = c.find('=');
    if (eq == std::string::npos) continue;
    const auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(' ');
      const size_t b = s.find_last_not_of(' ');
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(c.substr(0, eq)), val = trim(c.substr(eq + 1));
    if (key == "episode_seed") {
      ep_seed = std::stoull(val);
      have_seed = true;
    } else if (key == "spawn") {
      const size_t comma = val.find(',');
      require(comma != std::string::npos, "replay: malformed spawn comment");
      spawn = Vec2(std::stod(val.substr(0, comma)), std::stod(val.substr(comma + 1)));
    }
  }
  require(have_seed, "replay: log has no episode_seed comment");

  const int c_step = t.col("step");
  const int c_dpx = t.col("dp_x"), c_dpy = t.col("dp_y");
  const int c_k1 = t.col("k1"), c_k2 = t.col("k2");
  std::vector<RLAction> actions;
  long prev_step = -1;
  for (const auto& row : t.rows) {
    const long s = std::lround(row[c_step]);
    if (s == prev_step) continue;
    require(s == prev_step + 1, "replay: non-contiguous step column");
    prev_step = s;
    actions.push_back(RLAction{Vec2(row[c_dpx], row[c_dpy]), row[c_k1], row[c_k2]});
  }
  require(!actions.empty(), "replay: log has no decision rows");

  MazeEnv env(maze, cfg.sim, make_run_setup(cfg));
  env.start_log(regen_path, t.comments);
  env.reset_at(spawn, ep_seed);
  for (const auto& a : actions) {
    require(!env.done(), "replay: log continues past episode end");
    env.step(a);
  }
  env.stop_log();

  const std::string orig = read_file(episode_csv);
  const std::string regen = read_file(regen_path);
  ReplayCheck out;
  out.match = orig == regen;
  out.lines_compared = t.rows.size();
  if (!out.match) {
    std::istringstream ia(orig), ib(regen);
    std::string la, lb;
    size_t ln = 0;
    while (true) {
      const bool ga = static_cast<bool>(std::getline(ia, la));
      const bool gb = static_cast<bool>(std::getline(ib, lb));
      ++ln;
      if (!ga && !gb) break;
      if (la != lb || ga != gb) {
        out.mismatch = "line " + std::to_string(ln) + ": '" + (ga ? la : "<eof>") + "' vs '" +
                       (gb ? lb : "<eof>") + "'";
        break;
      }
    }
    if (out.mismatch.empty()) out.mismatch = "files differ";
  }
  return out;
}

}  // namespace tankguard
