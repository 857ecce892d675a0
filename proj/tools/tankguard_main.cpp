// Command-line front end: collect, pretrain, train, eval, replay, compare.
// Exit codes: 0 ok, 1 runtime failure (including replay mismatch), 2 usage
// or malformed configuration.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tankguard/compare.hpp"
#include "tankguard/config.hpp"
#include "tankguard/offline.hpp"
#include "tankguard/train.hpp"

namespace fs = std::filesystem;
using namespace tankguard;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string maze_path;
  std::string out_dir;
  std::string run_config;
  std::string layer;  // "on"/"off"/""
  std::optional<uint64_t> seed;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool wants_maze) {
  cmd->add_option("--config", c.config_path, "configuration file");
  if (wants_maze) cmd->add_option("--maze", c.maze_path, "maze json");
  cmd->add_option("--out", c.out_dir, "output directory (default $TANKGUARD_OUT/<cmd> or out/<cmd>)");
  cmd->add_option("--run-config", c.run_config, "agnostic | Eb<b> | Eb<b>-Ef<f>");
  cmd->add_option("--layer", c.layer, "on|off: enforce the energy layer")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_flag("--force", c.force, "allow writing into a non-empty output directory");
}

HarnessConfig resolve(const CommonOpts& c) {
  const ConfigFile f = c.config_path.empty() ? ConfigFile() : ConfigFile::parse_file(c.config_path);
  HarnessConfig h = load_harness_config(f);
  if (!c.maze_path.empty()) h.maze_path = c.maze_path;
  if (!c.run_config.empty()) {
    parse_run_config(c.run_config);
    h.run_config = c.run_config;
  }
  if (!c.layer.empty()) h.layer_on = c.layer == "on";
  if (c.seed) h.seed = *c.seed;
  return h;
}

std::string out_dir_for(const CommonOpts& c, const std::string& cmd) {
  if (!c.out_dir.empty()) return c.out_dir;
  const char* root = std::getenv("TANKGUARD_OUT");
  return std::string(root && *root ? root : "out") + "/" + cmd;
}

void prepare_out_dir(const std::string& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw std::runtime_error("out: " + dir + " is not empty (pass --force to overwrite)");
  fs::create_directories(dir);
}

MazeSpec require_maze(const HarnessConfig& h) {
  if (h.maze_path.empty())
    throw std::invalid_argument("usage: a maze is required (--maze or run.maze in the config)");
  return load_maze(h.maze_path);
}

// Snapshot + maze copy: everything replay or a later eval needs to rebuild
// this run's environment.
void write_run_context(const std::string& dir, const HarnessConfig& h, const MazeSpec& maze) {
  write_text_file(dir + "/config_snapshot.toml", canonical_config(h, h.maze_path));
  save_maze(maze, dir + "/maze.json");
}

int cmd_collect(const CommonOpts& c, bool jsonl) {
  HarnessConfig h = resolve(c);
  const MazeSpec maze = require_maze(h);
  const std::string out = out_dir_for(c, "collect");
  prepare_out_dir(out, c.force);
  const auto t0 = std::chrono::steady_clock::now();

  CollectStats stats;
  const std::vector<Transition> data =
      collect_offline(maze, h.sim, make_run_setup(h), h.tuples, h.seed, &stats, h.episode_cap);
  save_dataset_binary(data, out + "/dataset.bin");
  if (jsonl) save_dataset_jsonl(data, out + "/dataset.jsonl");
  write_run_context(out, h, maze);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta_json(out + "/meta.json", h, to_json(maze).dump(), "collect", wall);
  nlohmann::json j;
  j["tuples"] = stats.tuples;
  j["episodes"] = stats.episodes;
  j["force_violations"] = stats.force_violations;
  j["budget_violations"] = stats.budget_violations;
  j["flow_violations"] = stats.flow_violations;
  j["successes"] = stats.successes;
  j["violation_rate"] = stats.violation_rate();
  write_text_file(out + "/collect_stats.json", j.dump(2) + "\n");
  std::cout << "collect: " << stats.tuples << " tuples, violation rate "
            << stats.violation_rate() << ", " << out << "/dataset.bin\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& c, const std::string& data_path, int epochs_flag) {
  HarnessConfig h = resolve(c);
  if (epochs_flag > 0) h.epochs = epochs_flag;
  const std::string out = out_dir_for(c, "pretrain");
  prepare_out_dir(out, c.force);
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<Transition> data = load_dataset(data_path);
  PretrainReport report;
  const SafetyLearner learner = pretrain_safety(data, h.agent, h.seed, h.epochs, &report);
  learner.save(out);

  nlohmann::json j;
  j["tuples"] = data.size();
  j["epochs"] = h.epochs;
  j["auc"] = report.auc;
  j["held_out"] = report.n_held_out;
  j["held_out_violations"] = report.held_out_violations;
  j["train_violations"] = report.train_violations;
  j["degenerate"] = report.degenerate;
  j["final_loss"] = report.critic_loss.empty() ? 0.0 : report.critic_loss.back();
  write_text_file(out + "/pretrain_report.json", j.dump(2) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta_json(out + "/meta.json", h, "", "pretrain", wall);
  std::cout << "pretrain: auc " << report.auc << " on " << report.n_held_out
            << " held-out tuples, nets in " << out << "\n";
  return 0;
}

int cmd_train(const CommonOpts& c, const std::string& safety_dir, int episodes_flag,
              int checkpoint_every) {
  HarnessConfig h = resolve(c);
  if (episodes_flag > 0) h.episodes = episodes_flag;
  if (!safety_dir.empty()) h.agent.safety_enabled = true;
  const MazeSpec maze = require_maze(h);
  const std::string out = out_dir_for(c, "train");
  prepare_out_dir(out, c.force);
  const auto t0 = std::chrono::steady_clock::now();

  SacAgent agent(h.agent, h.seed);
  if (!safety_dir.empty()) {
    SafetyLearner s = SafetyLearner::init(h.agent, h.seed);
    s.load(safety_dir);
    agent.set_safety(s);
  }
  write_run_context(out, h, maze);
  const TrainResult res = train_policy(h, maze, agent, out, checkpoint_every);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta_json(out + "/meta.json", h, to_json(maze).dump(), "train", wall);
  std::cout << "train: " << h.episodes << " episodes, " << res.total_steps << " steps, "
            << "trailing success " << res.final_success_rate << ", checkpoint in " << out
            << "/checkpoint\n";
  return 0;
}

int cmd_eval(const CommonOpts& c, const std::string& checkpoint, int episodes_flag,
             int log_episodes_flag) {
  HarnessConfig h = resolve(c);
  if (episodes_flag > 0) h.eval_episodes = episodes_flag;
  if (log_episodes_flag >= 0) h.log_episodes = log_episodes_flag;
  const MazeSpec maze = require_maze(h);
  const std::string out = out_dir_for(c, "eval");
  prepare_out_dir(out, c.force);
  const auto t0 = std::chrono::steady_clock::now();

  SacAgent agent(h.agent, h.seed);
  agent.load(checkpoint);
  write_run_context(out, h, maze);
  const EvalSummary sum = evaluate_policy(h, maze, agent, out);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta_json(out + "/meta.json", h, to_json(maze).dump(), "eval", wall);
  std::cout << "eval: success " << sum.success_rate << " over " << sum.episodes
            << " episodes, mean end budget " << sum.mean_tank_end << " J, results in " << out
            << "\n";
  return 0;
}

int cmd_replay(const CommonOpts& c, const std::string& episode_csv) {
  if (c.config_path.empty())
    throw std::invalid_argument("usage: replay needs --config (a run's config_snapshot.toml)");
  HarnessConfig h = resolve(c);

  // Prefer the maze copy sitting next to the snapshot, then --maze/run.maze.
  const fs::path snap_dir = fs::path(c.config_path).parent_path();
  MazeSpec maze;
  if (c.maze_path.empty() && fs::exists(snap_dir / "maze.json"))
    maze = load_maze((snap_dir / "maze.json").string());
  else
    maze = require_maze(h);

  const std::string regen = c.out_dir.empty()
                                ? episode_csv + ".replay"
                                : (fs::path(c.out_dir) / fs::path(episode_csv).filename()).string();
  if (!c.out_dir.empty()) fs::create_directories(c.out_dir);
  const ReplayCheck check = replay_episode_file(episode_csv, h, maze, regen);
  if (check.match) {
    std::cout << "replay: match (" << check.lines_compared << " rows): " << episode_csv << "\n";
    return 0;
  }
  std::cout << "replay: MISMATCH: " << check.mismatch << "\n";
  return 1;
}

int cmd_compare(const CommonOpts& c, const std::vector<std::string>& run_dirs, int trace_run,
                int trace_episode) {
  const std::string out = out_dir_for(c, "compare");
  prepare_out_dir(out, c.force);
  const CompareResult res = compare_runs(run_dirs, out, trace_run, trace_episode);
  std::cout << "compare: " << res.groups.size() << " group(s) over " << run_dirs.size()
            << " run(s), tables in " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"energy-tank maze manipulation harness"};
  app.require_subcommand(1);

  CommonOpts c_collect, c_pretrain, c_train, c_eval, c_replay, c_compare;

  auto* collect = app.add_subcommand("collect", "gather random-policy transitions");
  add_common(collect, c_collect, true);
  bool collect_jsonl = false;
  collect->add_flag("--jsonl", collect_jsonl, "also write dataset.jsonl");

  auto* pretrain = app.add_subcommand("pretrain", "fit the safety critic offline");
  add_common(pretrain, c_pretrain, false);
  std::string pretrain_data;
  int pretrain_epochs = 0;
  pretrain->add_option("--data", pretrain_data, "dataset file (.bin or .jsonl)")->required();
  pretrain->add_option("--epochs", pretrain_epochs, "training epochs");

  auto* train = app.add_subcommand("train", "train a policy in the maze");
  add_common(train, c_train, true);
  std::string train_safety;
  int train_episodes = 0, train_ckpt_every = 0;
  train->add_option("--safety", train_safety, "pretrained safety nets directory");
  train->add_option("--episodes", train_episodes, "training episodes");
  train->add_option("--checkpoint-every", train_ckpt_every, "periodic checkpoint interval");

  auto* eval = app.add_subcommand("eval", "run a trained policy deterministically");
  add_common(eval, c_eval, true);
  std::string eval_checkpoint;
  int eval_episodes = 0, eval_log_episodes = -1;
  eval->add_option("--checkpoint", eval_checkpoint, "agent checkpoint directory")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--log-episodes", eval_log_episodes, "per-tick logs for the first N episodes");

  auto* replay = app.add_subcommand("replay", "re-execute a per-tick episode log and compare");
  add_common(replay, c_replay, true);
  std::string replay_file;
  replay->add_option("file", replay_file, "episode csv written by eval")->required();

  auto* compare = app.add_subcommand("compare", "aggregate eval runs into tables");
  add_common(compare, c_compare, false);
  std::vector<std::string> compare_dirs;
  int trace_run = -1, trace_episode = 0;
  compare->add_option("runs", compare_dirs, "eval run directories")->required();
  compare->add_option("--trace-run", trace_run, "index into runs for the episode trace");
  compare->add_option("--trace-episode", trace_episode, "episode index for the trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*collect) return cmd_collect(c_collect, collect_jsonl);
    if (*pretrain) return cmd_pretrain(c_pretrain, pretrain_data, pretrain_epochs);
    if (*train) return cmd_train(c_train, train_safety, train_episodes, train_ckpt_every);
    if (*eval) return cmd_eval(c_eval, eval_checkpoint, eval_episodes, eval_log_episodes);
    if (*replay) return cmd_replay(c_replay, replay_file);
    if (*compare) return cmd_compare(c_compare, compare_dirs, trace_run, trace_episode);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
