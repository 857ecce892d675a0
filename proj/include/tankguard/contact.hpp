#pragma once

#include <vector>

#include "tankguard/common.hpp"
#include "tankguard/maze.hpp"

namespace tankguard {

// Penalty-based contact model. Interpenetration depth delta and its rate feed
// a spring-damper normal force f_n = max(0, k*delta + c*delta_dot); the clamp
// keeps separating contacts from pulling.

struct ContactParams {
  double k_contact = 1e5;  // N/m
  double c_contact = 50.0; // N s/m
  double drag = 5.0;       // N s/m, obstacle floor drag
  double ee_radius = 0.01; // m
};

struct BodyState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
};

// Normal force magnitude for penetration depth delta closing at rate
// delta_dot (positive = deepening).
inline double penalty_force(double delta, double delta_dot, const ContactParams& p) {
  if (delta <= 0.0) return 0.0;
  return std::max(0.0, p.k_contact * delta + p.c_contact * delta_dot);
}

// Force a wall exerts on a disc (zero when not touching).
inline Vec2 wall_disc_force(const WallRect& w, const BodyState& b, double radius,
                            const ContactParams& p) {
  const Vec2 q = rect_closest_point(w, b.pos);
  Vec2 n = b.pos - q;
  double d = n.norm();
  if (d < 1e-12) {
    // Disc center inside the rectangle: push out along the shallowest face.
    const double dl = b.pos[0] - w.lo[0], dr = w.hi[0] - b.pos[0];
    const double db = b.pos[1] - w.lo[1], dt = w.hi[1] - b.pos[1];
    const double m = std::min({dl, dr, db, dt});
    n = (m == dl) ? Vec2(-1, 0) : (m == dr) ? Vec2(1, 0) : (m == db) ? Vec2(0, -1) : Vec2(0, 1);
    const double delta = radius + m;
    return penalty_force(delta, -b.vel.dot(n), p) * n;
  }
  const double delta = radius - d;
  if (delta <= 0.0) return Vec2::Zero();
  n /= d;
  return penalty_force(delta, -b.vel.dot(n), p) * n;
}

// Equal-and-opposite force pair between two discs; returns the force on a.
inline Vec2 disc_disc_force(const BodyState& a, double ra, const BodyState& b, double rb,
                            const ContactParams& p) {
  Vec2 n = a.pos - b.pos;
  const double d = n.norm();
  const double delta = ra + rb - d;
  if (delta <= 0.0 || d < 1e-12) return Vec2::Zero();
  n /= d;
  const double delta_dot = -(a.vel - b.vel).dot(n);
  return penalty_force(delta, delta_dot, p) * n;
}

struct ContactForces {
  Vec2 on_ee = Vec2::Zero();
  std::vector<Vec2> on_obstacle;  // same order as the maze's obstacle list
};

// All contact forces for the current body poses. Obstacles collide with the
// end-effector, with every wall, and with each other.
inline ContactForces compute_contacts(const MazeSpec& maze, const BodyState& ee,
                                      const std::vector<BodyState>& obstacles,
                                      const ContactParams& p) {
  ContactForces out;
  out.on_obstacle.assign(obstacles.size(), Vec2::Zero());
  for (const auto& w : maze.walls) out.on_ee += wall_disc_force(w, ee, p.ee_radius, p);
  for (size_t i = 0; i < obstacles.size(); ++i) {
    const double ri = maze.obstacles[i].radius;
    const Vec2 f = disc_disc_force(ee, p.ee_radius, obstacles[i], ri, p);
    out.on_ee += f;
    out.on_obstacle[i] -= f;
    for (const auto& w : maze.walls)
      out.on_obstacle[i] += wall_disc_force(w, obstacles[i], ri, p);
    for (size_t j = i + 1; j < obstacles.size(); ++j) {
      const Vec2 fij =
          disc_disc_force(obstacles[i], ri, obstacles[j], maze.obstacles[j].radius, p);
      out.on_obstacle[i] += fij;
      out.on_obstacle[j] -= fij;
    }
    // Floor drag keeps pushed obstacles from coasting forever.
    out.on_obstacle[i] -= p.drag * obstacles[i].vel;
  }
  return out;
}

}  // namespace tankguard
