#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <vector>

#include "tankguard/common.hpp"
#include "tankguard/contact.hpp"
#include "tankguard/control.hpp"
#include "tankguard/csvlog.hpp"
#include "tankguard/maze.hpp"
#include "tankguard/rng.hpp"
#include "tankguard/tank.hpp"

namespace tankguard {

// Maze navigation as a constrained MDP. The agent picks an equilibrium
// displacement and a stiffness pair at 10 Hz; the impedance controller plus
// penalty contacts run at 1 kHz underneath. Constraints can terminate the
// episode: excessive contact force, tank budget exhausted, flow limit broken.

struct SimParams {
  double dt = 1e-3;         // controller tick [s]
  int ticks_per_step = 100; // 1 kHz inner loop, 10 Hz decisions
  double mass = 1.0;        // kg, end-effector point mass
  double zeta = 1.0;        // damping ratio
  double k_init = 500.0;    // N/m, stiffness before the first action
  int step_limit = 300;     // episode cap in decisions
  double spawn_jitter = 0.005;  // m, reset pose jitter
  double f_max = 40.0;      // N, contact force limit
  double r_pos = -400.0;    // per-step distance penalty weight
  double r_col = -250.0;    // collision (force violation) penalty
  double r_goal = 1000.0;   // success bonus
  ContactParams contact;
};

inline void validate(const SimParams& p) {
  require(p.dt > 0.0 && p.ticks_per_step > 0, "sim: dt and ticks_per_step must be positive");
  require(p.mass > 0.0 && p.zeta > 0.0, "sim: mass and zeta must be positive");
  require(p.k_init >= kStiffMin && p.k_init <= kStiffMax, "sim: k_init outside bounds");
  require(p.step_limit > 0, "sim: step_limit must be positive");
  require(p.f_max > 0.0, "sim: f_max must be positive");
  // The stiffest admissible contact/spring pair must stay well inside the
  // integrator's stability region.
  const double w_max = std::sqrt(p.contact.k_contact / p.mass);
  require(w_max * p.dt < 2.0, "sim: contact stiffness unstable at this dt");
}

struct ConstraintSet {
  bool force = true;   // always part of the task
  bool budget = false; // tank energy floor
  bool flow = false;   // flow lower bound
};

struct RunSetup {
  ConstraintSet constraints;
  TankConfig tank;      // bounds for the layer and for monitoring
  bool layer_on = false;
  double tank_init = 6.0;  // J at episode start
};

struct RLAction {
  Vec2 dp = Vec2::Zero();  // equilibrium displacement [m]
  double k1 = 500.0;       // N/m along dp
  double k2 = 500.0;       // N/m orthogonal
};

struct StepFlags {
  bool force = false;    // condition observed this step (independent of enablement)
  bool tank = false;
  bool flow = false;
  bool success = false;
  bool clipped = false;  // action was clamped into bounds
};

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
  StepFlags flags;
};

constexpr int kObsDim = 9;     // wrench (6) + position (3); planar slots are zero
constexpr int kWrenchDim = 6;  // prefix of the observation
constexpr int kActDim = 4;     // dp_x, dp_y, k1, k2

// Running per-episode extrema of the tank state, updated every tick. This is
// how the hard passivity guarantee is checked without grovelling through
// per-tick logs: the monitor reads the same state the controller acted on.
struct TickExtrema {
  double energy_min = std::numeric_limits<double>::infinity();
  double energy_max = -std::numeric_limits<double>::infinity();
  double flow_applied_min = std::numeric_limits<double>::infinity();
  double alpha_min = std::numeric_limits<double>::infinity();
  long ticks = 0;
};

class MazeEnv {
 public:
  MazeEnv(MazeSpec maze, SimParams prm, RunSetup run)
      : maze_(std::move(maze)), prm_(prm), run_(run) {
    validate(maze_, prm_.contact.ee_radius);
    validate(prm_);
    validate(run_.tank);
    require(run_.tank_init >= run_.tank.e_min && run_.tank_init <= run_.tank.e_max,
            "sim: tank_init outside tank bounds");
    tank_cfg_ = run_.tank;
    tank_cfg_.filter_flow = run_.layer_on;
    tank_cfg_.filter_budget = run_.layer_on;
  }

  Eigen::VectorXd reset(uint64_t seed) { return reset_at(maze_.start, seed); }

  // Reset at an arbitrary free pose (offline data collection spawns here).
  Eigen::VectorXd reset_at(const Vec2& pose, uint64_t seed) {
    Rng rng(seed);
    Vec2 p = pose;
    for (int attempt = 0; attempt < 20; ++attempt) {
      const Vec2 cand =
          pose + Vec2(rng.uniform(-prm_.spawn_jitter, prm_.spawn_jitter),
                      rng.uniform(-prm_.spawn_jitter, prm_.spawn_jitter));
      if (disc_free(maze_, cand, prm_.contact.ee_radius)) {
        p = cand;
        break;
      }
    }
    ee_ = BodyState{p, Vec2::Zero()};
    obstacles_.clear();
    for (const auto& o : maze_.obstacles) obstacles_.push_back(BodyState{o.center, Vec2::Zero()});
    rot_ = Mat2::Identity();
    k_eff_ = Mat2::Identity() * prm_.k_init;
    d_ = damping_from_stiffness(k_eff_, prm_.mass, prm_.zeta);
    equilibrium_ = ee_.pos;
    tank_ = TankState{};
    tank_.energy = run_.tank_init;
    sensed_ = Vec2::Zero();
    extrema_ = TickExtrema{};
    step_idx_ = 0;
    ticks_total_ = 0;
    done_ = false;
    last_action_ = RLAction{Vec2::Zero(), prm_.k_init, prm_.k_init};
    return observation();
  }

  StepResult step(const RLAction& raw) {
    require(!done_, "sim: step() after episode end");
    StepResult out;
    RLAction a = raw;
    out.flags.clipped = clip_action(a);
    last_action_ = a;

    equilibrium_ = ee_.pos + a.dp;
    rot_ = motion_rotation(a.dp, rot_);
    const Mat2 k_req = map_action_stiffness({a.k1, a.k2}, a.dp, rot_);
    const Mat2 k_new =
        run_.layer_on ? gate_stiffness(tank_.depleted, k_eff_, k_req) : k_req;
    if (std::memcmp(k_new.data(), k_eff_.data(), sizeof(double) * 4) != 0) {
      k_eff_ = k_new;
      d_ = damping_from_stiffness(k_eff_, prm_.mass, prm_.zeta);
    }

    trace_.clear();
    bool terminated = false;
    for (int t = 0; t < prm_.ticks_per_step && !terminated; ++t) {
      const StepFlags tick_flags = tick();
      out.flags.force |= tick_flags.force;
      out.flags.tank |= tick_flags.tank;
      out.flags.flow |= tick_flags.flow;
      out.flags.success |= tick_flags.success;
      terminated = tick_flags.success ||
                   (run_.constraints.force && tick_flags.force) ||
                   (run_.constraints.budget && tick_flags.tank) ||
                   (run_.constraints.flow && tick_flags.flow);
    }
    ++step_idx_;

    out.reward = prm_.r_pos * (ee_.pos - maze_.goal).norm();
    if (out.flags.force && run_.constraints.force) out.reward += prm_.r_col;
    if (out.flags.success) out.reward += prm_.r_goal;
    out.done = terminated || step_idx_ >= prm_.step_limit;
    done_ = out.done;
    out.obs = observation();

    if (!trace_.empty()) {
      trace_.back().reward = out.reward;
      flush_trace();
    }
    return out;
  }

  Eigen::VectorXd observation() const {
    Eigen::VectorXd o = Eigen::VectorXd::Zero(kObsDim);
    o[0] = sensed_[0];
    o[1] = sensed_[1];
    o[6] = ee_.pos[0];
    o[7] = ee_.pos[1];
    return o;
  }

  // Per-tick episode log. Columns are fixed; see docs/formats.md.
  static std::vector<std::string> log_columns() {
    return {"tick",       "p_x",       "p_y",   "v_x",      "v_y",
            "f_x",        "f_y",       "k_eig1", "k_eig2",  "tank_t",
            "tank_e",     "flow_raw",  "flow_applied",      "alpha",
            "depleted",   "reward",    "violated_force",    "violated_tank",
            "violated_flow", "success", "step",  "dp_x",    "dp_y",
            "k1",         "k2",        "eq_x",   "eq_y"};
  }

  void start_log(const std::string& path, const std::vector<std::string>& meta) {
    log_ = std::make_unique<CsvWriter>(path);
    for (const auto& m : meta) log_->comment(m);
    log_->header(log_columns());
  }
  void stop_log() { log_.reset(); }

  bool done() const { return done_; }
  int steps_taken() const { return step_idx_; }
  long ticks_total() const { return ticks_total_; }
  double sim_time() const { return static_cast<double>(ticks_total_) * prm_.dt; }
  const TankState& tank() const { return tank_; }
  const TickExtrema& extrema() const { return extrema_; }
  const Vec2& pos() const { return ee_.pos; }
  const Vec2& vel() const { return ee_.vel; }
  const Vec2& sensed_wrench() const { return sensed_; }
  const Mat2& stiffness() const { return k_eff_; }
  const Vec2& equilibrium() const { return equilibrium_; }
  const MazeSpec& maze() const { return maze_; }
  const SimParams& params() const { return prm_; }
  const RunSetup& run() const { return run_; }
  double goal_distance() const { return (ee_.pos - maze_.goal).norm(); }

 private:
  bool clip_action(RLAction& a) const {
    require(finite(a.dp) && finite(a.k1) && finite(a.k2), "sim: non-finite action");
    bool clipped = false;
    for (int i = 0; i < 2; ++i) {
      const double c = std::clamp(a.dp[i], -kDispMax, kDispMax);
      clipped |= c != a.dp[i];
      a.dp[i] = c;
    }
    const double k1 = std::clamp(a.k1, kStiffMin, kStiffMax);
    const double k2 = std::clamp(a.k2, kStiffMin, kStiffMax);
    clipped |= k1 != a.k1 || k2 != a.k2;
    a.k1 = k1;
    a.k2 = k2;
    return clipped;
  }

  StepFlags tick() {
    StepFlags flags;
    const Vec2 err = equilibrium_ - ee_.pos;
    const Wrench w = elastic_wrench(k_eff_, err);
    const ContactForces fc = compute_contacts(maze_, ee_, obstacles_, prm_.contact);
    sensed_ = -fc.on_ee;  // what the end-effector presses onto the world

    if (sensed_.norm() > prm_.f_max) flags.force = true;

    // Tank flow: the spring's injected power, negated.
    const double flow_raw = -spring_power(w, ee_.vel);
    tank_ = tank_step(tank_, flow_raw, prm_.dt, tank_cfg_);
    extrema_.energy_min = std::min(extrema_.energy_min, tank_.energy);
    extrema_.energy_max = std::max(extrema_.energy_max, tank_.energy);
    extrema_.flow_applied_min = std::min(extrema_.flow_applied_min, tank_.flow_applied);
    extrema_.alpha_min = std::min(extrema_.alpha_min, tank_.alpha);
    ++extrema_.ticks;

    if (!run_.layer_on) {
      // Raw conditions, observable only when the layer is not enforcing them.
      // Budget: the monitored energy reached the floor this tick.
      if (tank_.energy <= run_.tank.e_min) flags.tank = true;
      if (tank_.flow_raw < run_.tank.flow_min) flags.flow = true;
    }

    const Vec2 f_cmd = impedance_force(k_eff_, d_, err, ee_.vel, tank_.alpha);
    ee_.vel += prm_.dt / prm_.mass * (f_cmd + fc.on_ee);
    ee_.pos += prm_.dt * ee_.vel;
    for (size_t i = 0; i < obstacles_.size(); ++i) {
      obstacles_[i].vel += prm_.dt / maze_.obstacles[i].mass * fc.on_obstacle[i];
      obstacles_[i].pos += prm_.dt * obstacles_[i].vel;
    }
    ++ticks_total_;

    if ((ee_.pos - maze_.goal).norm() <= maze_.goal_radius) flags.success = true;

    if (log_) {
      const Vec2 eig = sym_eigenvalues(k_eff_);
      trace_.push_back(TickRow{ticks_total_ - 1, step_idx_, ee_.pos, ee_.vel, sensed_,
                               eig[0], eig[1], sim_time(), tank_, 0.0, flags});
    }
    return flags;
  }

  struct TickRow {
    long tick;
    int step;
    Vec2 p, v, f;
    double keig1, keig2, t;
    TankState tank;
    double reward;
    StepFlags flags;
  };

  void flush_trace() {
    if (!log_) return;
    for (const auto& r : trace_) {
      log_->line({cell(r.tick), cell(r.p[0]), cell(r.p[1]), cell(r.v[0]), cell(r.v[1]),
                  cell(r.f[0]), cell(r.f[1]), cell(r.keig1), cell(r.keig2), cell(r.t),
                  cell(r.tank.energy), cell(r.tank.flow_raw), cell(r.tank.flow_applied),
                  cell(r.tank.alpha), cell(r.tank.depleted), cell(r.reward),
                  cell(r.flags.force), cell(r.flags.tank), cell(r.flags.flow),
                  cell(r.flags.success), cell(r.step), cell(last_action_.dp[0]),
                  cell(last_action_.dp[1]), cell(last_action_.k1), cell(last_action_.k2),
                  cell(equilibrium_[0]), cell(equilibrium_[1])});
    }
    trace_.clear();
  }

  MazeSpec maze_;
  SimParams prm_;
  RunSetup run_;
  TankConfig tank_cfg_;

  BodyState ee_;
  std::vector<BodyState> obstacles_;
  Mat2 rot_ = Mat2::Identity();
  Mat2 k_eff_ = Mat2::Identity();
  Mat2 d_ = Mat2::Identity();
  Vec2 equilibrium_ = Vec2::Zero();
  TankState tank_;
  Vec2 sensed_ = Vec2::Zero();
  TickExtrema extrema_;
  RLAction last_action_;
  int step_idx_ = 0;
  long ticks_total_ = 0;
  bool done_ = true;

  std::unique_ptr<CsvWriter> log_;
  std::vector<TickRow> trace_;
};

}  // namespace tankguard
