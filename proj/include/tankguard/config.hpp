#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tankguard/sac.hpp"
#include "tankguard/sim.hpp"

namespace tankguard {

// Plain-text run configuration: ini-style sections, `key = value`, `#`
// comments. Hand-rolled on purpose — the format is tiny, and config snapshots
// written by the harness must parse back identically.

class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<text>") {
    ConfigFile c;
    std::istringstream in(text);
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        require(line.back() == ']', origin + ":" + std::to_string(lineno) + ": unclosed section");
        section = trim(line.substr(1, line.size() - 2));
        require(!section.empty(), origin + ":" + std::to_string(lineno) + ": empty section name");
        continue;
      }
      const size_t eq = line.find('=');
      require(eq != std::string::npos,
              origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      require(!key.empty(), origin + ":" + std::to_string(lineno) + ": empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      require(!c.kv_.count(full),
              origin + ":" + std::to_string(lineno) + ": duplicate key " + full);
      c.kv_[full] = value;
    }
    return c;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    used_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    require(end && *end == '\0' && end != it->second.c_str(),
            "config: " + key + " is not a number: '" + it->second + "'");
    return v;
  }

  long long get_int(const std::string& key, long long dflt) const {
    const double v = get_double(key, static_cast<double>(dflt));
    const long long i = static_cast<long long>(v);
    require(static_cast<double>(i) == v, "config: " + key + " must be an integer");
    return i;
  }

  bool get_bool(const std::string& key, bool dflt) const {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::invalid_argument("config: " + key + " must be on/off, got '" + v + "'");
  }

  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& dflt) const {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      require(!tok.empty(), "config: " + key + " has an empty list entry");
      char* end = nullptr;
      const long v = std::strtol(tok.c_str(), &end, 10);
      require(end && *end == '\0', "config: " + key + " entry is not an integer: " + tok);
      out.push_back(static_cast<int>(v));
    }
    require(!out.empty(), "config: " + key + " is an empty list");
    return out;
  }

  // Typo guard: every key present in the file must have been consumed.
  void check_all_used() const {
    for (const auto& [k, v] : kv_)
      require(used_.count(k) > 0, "config: unknown key '" + k + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

// Named constraint configurations:
//   agnostic        force limit only
//   Eb<b>           force + an energy budget of b joules
//   Eb<b>-Ef<f>     additionally a flow floor of -f/10 watts
struct RunConfigSpec {
  ConstraintSet constraints;
  double budget = 6.0;     // tank capacity/injected energy for this run [J]
  double flow_min = -0.5;  // flow floor [W]
  bool has_budget_override = false;
  bool has_flow_override = false;
};

inline RunConfigSpec parse_run_config(const std::string& name) {
  RunConfigSpec r;
  r.constraints.force = true;
  if (name == "agnostic") return r;
  const auto bad = [&]() -> std::invalid_argument {
    return std::invalid_argument(
        "run-config: expected agnostic, Eb<b>, or Eb<b>-Ef<f>; got '" + name + "'");
  };
  if (name.rfind("Eb", 0) != 0) throw bad();
  size_t i = 2;
  std::string digits;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) digits += name[i++];
  if (digits.empty()) throw bad();
  r.budget = std::stod(digits);
  r.has_budget_override = true;
  r.constraints.budget = true;
  if (i == name.size()) return r;
  if (name.compare(i, 3, "-Ef") != 0) throw bad();
  i += 3;
  digits.clear();
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i]))) digits += name[i++];
  if (digits.empty() || i != name.size()) throw bad();
  r.flow_min = -std::stod(digits) / 10.0;  // Ef7 means -0.7 W
  r.has_flow_override = true;
  r.constraints.flow = true;
  return r;
}

// Everything a harness run needs, resolved from file + CLI overrides.
struct HarnessConfig {
  SimParams sim;
  TankConfig tank;        // base bounds; run-config overrides budget/flow
  double tank_init = 6.0;
  SacConfig agent;
  int episodes = 2000;
  int eval_episodes = 100;
  int epochs = 25;          // safety pretraining
  size_t tuples = 40000;    // offline collection size
  int episode_cap = 40;     // offline collection episode cut
  int log_episodes = 0;     // per-tick episode logs to keep in eval
  std::string run_config = "agnostic";
  bool layer_on = false;
  std::string maze_path;
  uint64_t seed = 1;
};

inline HarnessConfig load_harness_config(const ConfigFile& f) {
  HarnessConfig h;
  h.sim.dt = f.get_double("sim.dt", h.sim.dt);
  h.sim.ticks_per_step = static_cast<int>(f.get_int("sim.ticks_per_step", h.sim.ticks_per_step));
  h.sim.mass = f.get_double("sim.mass", h.sim.mass);
  h.sim.zeta = f.get_double("sim.zeta", h.sim.zeta);
  h.sim.k_init = f.get_double("sim.k_init", h.sim.k_init);
  h.sim.step_limit = static_cast<int>(f.get_int("sim.step_limit", h.sim.step_limit));
  h.sim.spawn_jitter = f.get_double("sim.spawn_jitter", h.sim.spawn_jitter);
  h.sim.f_max = f.get_double("sim.f_max", h.sim.f_max);
  h.sim.r_pos = f.get_double("sim.r_pos", h.sim.r_pos);
  h.sim.r_col = f.get_double("sim.r_col", h.sim.r_col);
  h.sim.r_goal = f.get_double("sim.r_goal", h.sim.r_goal);
  h.sim.contact.k_contact = f.get_double("contact.k_contact", h.sim.contact.k_contact);
  h.sim.contact.c_contact = f.get_double("contact.c_contact", h.sim.contact.c_contact);
  h.sim.contact.drag = f.get_double("contact.drag", h.sim.contact.drag);
  h.sim.contact.ee_radius = f.get_double("contact.ee_radius", h.sim.contact.ee_radius);
  h.tank.e_max = f.get_double("tank.e_max", h.tank.e_max);
  h.tank.e_min = f.get_double("tank.e_min", h.tank.e_min);
  h.tank.flow_min = f.get_double("tank.flow_min", h.tank.flow_min);
  h.tank_init = f.get_double("tank.init", h.tank.e_max);
  h.agent.hidden = f.get_int_list("agent.hidden", h.agent.hidden);
  h.agent.lr = f.get_double("agent.lr", h.agent.lr);
  h.agent.gamma = f.get_double("agent.gamma", h.agent.gamma);
  h.agent.tau = f.get_double("agent.tau", h.agent.tau);
  h.agent.entropy_target = f.get_double("agent.entropy_target", h.agent.entropy_target);
  h.agent.batch = static_cast<int>(f.get_int("agent.batch", h.agent.batch));
  h.agent.replay_capacity = static_cast<size_t>(
      f.get_int("agent.replay_capacity", static_cast<long long>(h.agent.replay_capacity)));
  h.agent.warmup_steps = static_cast<int>(f.get_int("agent.warmup_steps", h.agent.warmup_steps));
  h.agent.updates_per_step =
      static_cast<int>(f.get_int("agent.updates_per_step", h.agent.updates_per_step));
  h.agent.init_log_alpha = f.get_double("agent.init_log_alpha", h.agent.init_log_alpha);
  h.agent.safety_enabled = f.get_bool("agent.safety", h.agent.safety_enabled);
  h.agent.safety_frozen = f.get_bool("agent.freeze_safety", h.agent.safety_frozen);
  h.agent.gamma_safe = f.get_double("agent.gamma_safe", h.agent.gamma_safe);
  h.agent.eps_risk = f.get_double("agent.eps_risk", h.agent.eps_risk);
  h.agent.violation_fraction =
      f.get_double("agent.violation_fraction", h.agent.violation_fraction);
  h.episodes = static_cast<int>(f.get_int("train.episodes", h.episodes));
  h.eval_episodes = static_cast<int>(f.get_int("eval.episodes", h.eval_episodes));
  h.epochs = static_cast<int>(f.get_int("pretrain.epochs", h.epochs));
  h.tuples = static_cast<size_t>(f.get_int("collect.tuples", static_cast<long long>(h.tuples)));
  h.episode_cap = static_cast<int>(f.get_int("collect.episode_cap", h.episode_cap));
  h.log_episodes = static_cast<int>(f.get_int("eval.log_episodes", h.log_episodes));
  h.run_config = f.get_string("run.config", h.run_config);
  h.layer_on = f.get_bool("run.layer", h.layer_on);
  h.maze_path = f.get_string("run.maze", h.maze_path);
  h.seed = static_cast<uint64_t>(f.get_int("run.seed", static_cast<long long>(h.seed)));
  f.check_all_used();
  parse_run_config(h.run_config);  // validate the grammar early
  return h;
}

// The run setup the sim consumes, with the named config's overrides applied.
inline RunSetup make_run_setup(const HarnessConfig& h) {
  const RunConfigSpec rc = parse_run_config(h.run_config);
  RunSetup r;
  r.constraints = rc.constraints;
  r.tank = h.tank;
  r.layer_on = h.layer_on;
  r.tank_init = h.tank_init;
  if (rc.has_budget_override) {
    r.tank.e_max = rc.budget;
    r.tank_init = rc.budget;
  }
  if (rc.has_flow_override) r.tank.flow_min = rc.flow_min;
  return r;
}

// Canonical snapshot body: stable ordering, round-trippable numbers, parses
// back through ConfigFile.
inline std::string canonical_body(const HarnessConfig& h) {
  std::ostringstream o;
  o << "[sim]\n";
  o << "dt = " << fmt_double(h.sim.dt) << "\n";
  o << "ticks_per_step = " << h.sim.ticks_per_step << "\n";
  o << "mass = " << fmt_double(h.sim.mass) << "\n";
  o << "zeta = " << fmt_double(h.sim.zeta) << "\n";
  o << "k_init = " << fmt_double(h.sim.k_init) << "\n";
  o << "step_limit = " << h.sim.step_limit << "\n";
  o << "spawn_jitter = " << fmt_double(h.sim.spawn_jitter) << "\n";
  o << "f_max = " << fmt_double(h.sim.f_max) << "\n";
  o << "r_pos = " << fmt_double(h.sim.r_pos) << "\n";
  o << "r_col = " << fmt_double(h.sim.r_col) << "\n";
  o << "r_goal = " << fmt_double(h.sim.r_goal) << "\n";
  o << "[contact]\n";
  o << "k_contact = " << fmt_double(h.sim.contact.k_contact) << "\n";
  o << "c_contact = " << fmt_double(h.sim.contact.c_contact) << "\n";
  o << "drag = " << fmt_double(h.sim.contact.drag) << "\n";
  o << "ee_radius = " << fmt_double(h.sim.contact.ee_radius) << "\n";
  o << "[tank]\n";
  o << "e_max = " << fmt_double(h.tank.e_max) << "\n";
  o << "e_min = " << fmt_double(h.tank.e_min) << "\n";
  o << "flow_min = " << fmt_double(h.tank.flow_min) << "\n";
  o << "init = " << fmt_double(h.tank_init) << "\n";
  o << "[agent]\n";
  o << "hidden = ";
  for (size_t i = 0; i < h.agent.hidden.size(); ++i)
    o << (i ? "," : "") << h.agent.hidden[i];
  o << "\n";
  o << "lr = " << fmt_double(h.agent.lr) << "\n";
  o << "gamma = " << fmt_double(h.agent.gamma) << "\n";
  o << "tau = " << fmt_double(h.agent.tau) << "\n";
  o << "entropy_target = " << fmt_double(h.agent.entropy_target) << "\n";
  o << "batch = " << h.agent.batch << "\n";
  o << "replay_capacity = " << h.agent.replay_capacity << "\n";
  o << "warmup_steps = " << h.agent.warmup_steps << "\n";
  o << "updates_per_step = " << h.agent.updates_per_step << "\n";
  o << "init_log_alpha = " << fmt_double(h.agent.init_log_alpha) << "\n";
  o << "safety = " << (h.agent.safety_enabled ? "on" : "off") << "\n";
  o << "freeze_safety = " << (h.agent.safety_frozen ? "on" : "off") << "\n";
  o << "gamma_safe = " << fmt_double(h.agent.gamma_safe) << "\n";
  o << "eps_risk = " << fmt_double(h.agent.eps_risk) << "\n";
  o << "violation_fraction = " << fmt_double(h.agent.violation_fraction) << "\n";
  o << "[train]\n";
  o << "episodes = " << h.episodes << "\n";
  o << "[eval]\n";
  o << "episodes = " << h.eval_episodes << "\n";
  o << "log_episodes = " << h.log_episodes << "\n";
  o << "[pretrain]\n";
  o << "epochs = " << h.epochs << "\n";
  o << "[collect]\n";
  o << "tuples = " << h.tuples << "\n";
  o << "episode_cap = " << h.episode_cap << "\n";
  return o.str();
}

// Full snapshot written into run directories. The maze path goes in so the
// snapshot works as a config for replay; prefer an adjacent maze.json copy
// when resolving it.
inline std::string canonical_config(const HarnessConfig& h, const std::string& maze_path) {
  std::ostringstream o;
  o << canonical_body(h);
  o << "[run]\n";
  o << "config = " << h.run_config << "\n";
  o << "layer = " << (h.layer_on ? "on" : "off") << "\n";
  o << "maze = " << maze_path << "\n";
  o << "seed = " << h.seed << "\n";
  return o.str();
}

// Identity of a run's configuration: binds the maze by content, not by path,
// and excludes the seed (artifacts list the seed next to the hash).
inline uint64_t config_hash(const HarnessConfig& h, const std::string& maze_json) {
  std::ostringstream o;
  o << canonical_body(h);
  o << "[run]\n";
  o << "config = " << h.run_config << "\n";
  o << "layer = " << (h.layer_on ? "on" : "off") << "\n";
  o << "maze_content = " << hex64(fnv1a64(maze_json)) << "\n";
  return fnv1a64(o.str());
}

}  // namespace tankguard
