#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tankguard/csvlog.hpp"

namespace tankguard {

// Cross-run aggregation: takes eval run directories (episodes.csv +
// budget_trace.csv written by evaluate_policy), groups them by constraint
// configuration, and emits comparison tables. Works purely from the CSV
// artifacts and their comment headers.

inline std::map<std::string, std::string> parse_meta(const std::vector<std::string>& comments) {
  std::map<std::string, std::string> m;
  for (const auto& c : comments) {
    const size_t eq = c.find('=');
    if (eq == std::string::npos) continue;
    const auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(' ');
      const size_t b = s.find_last_not_of(' ');
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    m[trim(c.substr(0, eq))] = trim(c.substr(eq + 1));
  }
  return m;
}

struct RunData {
  std::string dir;
  std::map<std::string, std::string> meta;  // config_hash, seed, run_config, layer, maze
  CsvTable episodes;
  CsvTable trace;
};

inline RunData load_run(const std::string& dir) {
  RunData r;
  r.dir = dir;
  r.episodes = load_csv(dir + "/episodes.csv");
  r.trace = load_csv(dir + "/budget_trace.csv");
  r.meta = parse_meta(r.episodes.comments);
  for (const char* key : {"run_config", "layer", "maze", "seed", "config_hash"})
    require(r.meta.count(key) > 0, "compare: " + dir + "/episodes.csv lacks '" +
                                       std::string(key) + "' in its header comments");
  return r;
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Per-run scalars the table aggregates over seeds.
struct RunScalars {
  double success = 0.0;  // fraction of episodes
  double ret = 0.0;      // mean return
  double v_force = 0.0, v_tank = 0.0, v_flow = 0.0;  // violation episode fractions
  double tank_end = 0.0;
  double energy_spent = 0.0;
  double interventions = 0.0;  // mean per episode
  size_t episodes = 0;
};

inline RunScalars run_scalars(const CsvTable& eps) {
  RunScalars s;
  s.episodes = eps.rows.size();
  require(s.episodes > 0, "compare: episodes.csv has no rows");
  const int c_succ = eps.col("success"), c_ret = eps.col("return");
  const int c_vf = eps.col("violated_force"), c_vt = eps.col("violated_tank");
  const int c_vw = eps.col("violated_flow"), c_te = eps.col("tank_end");
  const int c_es = eps.col("energy_spent"), c_iv = eps.col("interventions");
  for (const auto& row : eps.rows) {
    s.success += row[c_succ];
    s.ret += row[c_ret];
    s.v_force += row[c_vf];
    s.v_tank += row[c_vt];
    s.v_flow += row[c_vw];
    s.tank_end += row[c_te];
    s.energy_spent += row[c_es];
    s.interventions += row[c_iv];
  }
  const double n = static_cast<double>(s.episodes);
  s.success /= n;
  s.ret /= n;
  s.v_force /= n;
  s.v_tank /= n;
  s.v_flow /= n;
  s.tank_end /= n;
  s.energy_spent /= n;
  s.interventions /= n;
  return s;
}

struct CompareResult {
  std::vector<std::string> groups;  // "run_config|layer=x" in first-seen order
};

// Writes table.csv (per-group aggregates across seeds), energy_trajectory.csv
// (per-step tank energy mean/std across every episode in the group), and —
// when trace_run >= 0 — trace_episode.csv with one episode's 10 Hz profile.
inline CompareResult compare_runs(const std::vector<std::string>& run_dirs,
                                  const std::string& out_dir, int trace_run = -1,
                                  int trace_episode = 0) {
  require(run_dirs.size() >= 1, "compare: need at least one run directory");
  std::vector<RunData> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));
  for (const auto& r : runs)
    require(r.meta.at("maze") == runs.front().meta.at("maze"),
            "compare: runs mix mazes (" + r.meta.at("maze") + " vs " +
                runs.front().meta.at("maze") + ")");

  std::vector<std::string> group_names;
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < runs.size(); ++i) {
    const std::string key = runs[i].meta.at("run_config") + "|layer=" + runs[i].meta.at("layer");
    if (!groups.count(key)) group_names.push_back(key);
    groups[key].push_back(i);
  }

  std::filesystem::create_directories(out_dir);
  CsvWriter table(out_dir + "/table.csv");
  table.comment("maze = " + runs.front().meta.at("maze"));
  for (const auto& name : group_names) {
    std::string hashes, seeds;
    for (size_t i : groups.at(name)) {
      hashes += (hashes.empty() ? "" : " ") + runs[i].meta.at("config_hash");
      seeds += (seeds.empty() ? "" : " ") + runs[i].meta.at("seed");
    }
    table.comment("group " + name + ": config_hash " + hashes + "; seeds " + seeds);
  }
  table.header({"run_config", "layer", "runs", "episodes", "success_mean", "success_std",
                "return_mean", "return_std", "force_viol_mean", "force_viol_std",
                "tank_viol_mean", "tank_viol_std", "flow_viol_mean", "flow_viol_std",
                "tank_end_mean", "tank_end_std", "energy_spent_mean", "energy_spent_std",
                "interventions_mean"});

  for (const auto& name : group_names) {
    const auto& idx = groups.at(name);
    std::vector<double> succ, ret, vf, vt, vw, te, es, iv;
    size_t n_eps = 0;
    for (size_t i : idx) {
      const RunScalars s = run_scalars(runs[i].episodes);
      succ.push_back(s.success);
      ret.push_back(s.ret);
      vf.push_back(s.v_force);
      vt.push_back(s.v_tank);
      vw.push_back(s.v_flow);
      te.push_back(s.tank_end);
      es.push_back(s.energy_spent);
      iv.push_back(s.interventions);
      n_eps += s.episodes;
    }
    const auto [sm, ss] = mean_std(succ);
    const auto [rm, rs] = mean_std(ret);
    const auto [fm, fs] = mean_std(vf);
    const auto [tm, ts] = mean_std(vt);
    const auto [wm, ws] = mean_std(vw);
    const auto [em, esd] = mean_std(te);
    const auto [pm, psd] = mean_std(es);
    const auto [im, isd] = mean_std(iv);
    (void)isd;
    const size_t bar = name.find("|layer=");
    table.line({name.substr(0, bar), name.substr(bar + 7), cell(static_cast<int>(idx.size())),
                cell(static_cast<long long>(n_eps)), cell(sm), cell(ss), cell(rm), cell(rs),
                cell(fm), cell(fs), cell(tm), cell(ts), cell(wm), cell(ws), cell(em), cell(esd),
                cell(pm), cell(psd), cell(im)});
  }

  // Tank energy against decision step, pooled over every episode of a group.
  CsvWriter traj(out_dir + "/energy_trajectory.csv");
  traj.comment("maze = " + runs.front().meta.at("maze"));
  traj.header({"run_config", "layer", "step", "tank_e_mean", "tank_e_std", "episodes"});
  for (const auto& name : group_names) {
    std::map<long, std::vector<double>> by_step;
    for (size_t i : groups.at(name)) {
      const CsvTable& tr = runs[i].trace;
      const int c_step = tr.col("step"), c_e = tr.col("tank_e");
      for (const auto& row : tr.rows)
        by_step[std::lround(row[c_step])].push_back(row[c_e]);
    }
    const size_t bar = name.find("|layer=");
    for (const auto& [step, vals] : by_step) {
      const auto [m, sd] = mean_std(vals);
      traj.line({name.substr(0, bar), name.substr(bar + 7), cell(step), cell(m), cell(sd),
                 cell(static_cast<long long>(vals.size()))});
    }
  }

  if (trace_run >= 0) {
    require(static_cast<size_t>(trace_run) < runs.size(), "compare: trace run out of range");
    const RunData& r = runs[static_cast<size_t>(trace_run)];
    const int c_ep = r.trace.col("episode"), c_step = r.trace.col("step");
    const int c_e = r.trace.col("tank_e"), c_k1 = r.trace.col("k_eig1"),
              c_k2 = r.trace.col("k_eig2");
    CsvWriter tw(out_dir + "/trace_episode.csv");
    tw.comment("run = " + r.dir);
    tw.comment("config_hash = " + r.meta.at("config_hash"));
    tw.comment("seed = " + r.meta.at("seed"));
    tw.comment("episode = " + std::to_string(trace_episode));
    tw.header({"step", "tank_e", "k_eig1", "k_eig2"});
    size_t written = 0;
    for (const auto& row : r.trace.rows) {
      if (std::lround(row[c_ep]) != trace_episode) continue;
      tw.line({cell(std::lround(row[c_step])), cell(row[c_e]), cell(row[c_k1]),
               cell(row[c_k2])});
      ++written;
    }
    require(written > 0, "compare: trace episode not present in run");
  }

  CompareResult res;
  res.groups = group_names;
  return res;
}

}  // namespace tankguard
