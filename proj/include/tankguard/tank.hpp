#pragma once

#include "tankguard/common.hpp"
#include "tankguard/control.hpp"

namespace tankguard {

// Energy-tank bookkeeping for the impedance controller. The tank absorbs the
// power the virtual spring injects into the robot (flow = -P_spring): it
// drains while the spring accelerates the mass and refills while the mass
// feeds energy back. Two filters keep the closed loop passive:
//   - flow filter:   the drain rate never exceeds flow_min  (flow scaling)
//   - budget filter: the stored energy stays inside [e_min, e_max]
// Both can be toggled so constraint monitoring can observe the raw values.

struct TankConfig {
  double e_max = 6.0;      // J, tank capacity
  double e_min = 0.0;      // J, depletion floor
  double flow_min = -0.5;  // W, most negative admissible flow (<= 0)
  bool filter_flow = true;
  bool filter_budget = true;
};

struct TankState {
  double energy = 6.0;
  double flow_raw = 0.0;      // last requested flow [W]
  double flow_applied = 0.0;  // last flow actually integrated [W]
  double alpha = 1.0;         // last flow scale in [0, 1]
  bool depleted = false;      // last drain request would have crossed e_min
};

inline void validate(const TankConfig& c) {
  require(finite(c.e_max) && finite(c.e_min) && finite(c.flow_min),
          "tank config: non-finite value");
  require(c.e_min < c.e_max, "tank config: e_min must be below e_max");
  require(c.flow_min <= 0.0, "tank config: flow_min must be <= 0");
}

// Power the spring wrench injects into the end-effector.
inline double spring_power(const Wrench& w, const Vec2& vel) {
  require(finite(vel), "spring_power: non-finite velocity");
  return w.f.dot(vel);
}

// Flow scale: shrink a draining flow so it never drops below flow_min.
// Refilling or mildly draining flows pass through unscaled.
inline double flow_scale(double flow_raw, const TankConfig& cfg) {
  require(finite(flow_raw), "flow_scale: non-finite flow");
  if (flow_raw < cfg.flow_min && cfg.flow_min <= 0.0) return cfg.flow_min / flow_raw;
  return 1.0;
}

// One tick of tank integration. The scaled flow is applied only if the
// resulting energy stays inside [e_min, e_max]; otherwise nothing is stored
// or drained this tick. `depleted` records a rejected drain (the signal the
// stiffness gate acts on); a rejected refill just discards the excess.
inline TankState tank_step(const TankState& s, double flow_raw, double dt,
                           const TankConfig& cfg) {
  require(finite(flow_raw), "tank_step: non-finite flow");
  require(finite(dt) && dt > 0.0, "tank_step: dt must be positive");
  TankState n = s;
  n.flow_raw = flow_raw;
  double scaled = flow_raw;
  n.alpha = 1.0;
  if (cfg.filter_flow && flow_raw < cfg.flow_min && cfg.flow_min <= 0.0) {
    n.alpha = cfg.flow_min / flow_raw;
    // alpha * flow_raw == flow_min by construction; assign it directly so the
    // clipped flow honors the bound bit-exactly (the rounded product can
    // overshoot by an ulp).
    scaled = cfg.flow_min;
  }
  if (!cfg.filter_budget) {
    // Monitoring mode: integrate freely so logs show what would have happened.
    n.flow_applied = scaled;
    n.energy = s.energy + scaled * dt;
    n.depleted = n.energy < cfg.e_min;
    return n;
  }
  const double e_next = s.energy + scaled * dt;
  if (e_next >= cfg.e_min && e_next <= cfg.e_max) {
    n.flow_applied = scaled;
    n.energy = e_next;
    n.depleted = false;
  } else {
    n.flow_applied = 0.0;
    n.depleted = e_next < cfg.e_min;
  }
  return n;
}

// Stiffness gate: while the tank is depleted, requests that would stiffen the
// spring are held at the previous value (they would store energy the tank
// cannot pay for). "Stiffen" means the symmetric difference K_new - K_prev
// has a positive eigenvalue; pure softening always passes.
inline Mat2 gate_stiffness(bool depleted, const Mat2& k_prev, const Mat2& k_new) {
  require(finite(k_prev) && finite(k_new), "gate_stiffness: non-finite stiffness");
  if (!depleted) return k_new;
  const Mat2 diff = k_new - k_prev;
  if (sym_eigenvalues(diff)[1] > 0.0) return k_prev;
  return k_new;
}

struct LayerResult {
  Mat2 k = Mat2::Zero();
  double alpha = 1.0;
  TankState tank;
};

// Composite per-tick layer update: gate the stiffness request against the
// current depletion state, then integrate the flow. With both filters off
// this is an exact passthrough (alpha == 1.0, stiffness untouched).
inline LayerResult passivity_layer_step(const Mat2& k_prev, const Mat2& k_requested,
                                        double flow_raw, const TankState& tank, double dt,
                                        const TankConfig& cfg) {
  LayerResult r;
  r.k = (cfg.filter_budget || cfg.filter_flow)
            ? gate_stiffness(tank.depleted, k_prev, k_requested)
            : k_requested;
  r.tank = tank_step(tank, flow_raw, dt, cfg);
  r.alpha = r.tank.alpha;
  return r;
}

}  // namespace tankguard
