#pragma once

#include "tankguard/common.hpp"

namespace tankguard {

// Variable-impedance control in the plane. The robot is reduced to a unit
// point mass at the end-effector, so the task Jacobian drops out and wrenches
// are plain 2D forces.

struct ActionStiffness {
  double k1 = 0.0;  // stiffness along the commanded motion direction [N/m]
  double k2 = 0.0;  // stiffness orthogonal to it [N/m]
};

struct Wrench {
  Vec2 f = Vec2::Zero();
  double norm() const { return f.norm(); }
};

constexpr double kStiffMin = 300.0;   // N/m
constexpr double kStiffMax = 1000.0;  // N/m
constexpr double kDispMax = 0.03;     // m, per-step equilibrium displacement bound

// Rotation whose first column is the unit motion direction. Falls back to the
// caller-supplied previous frame when the displacement is too small to define
// a direction (the sim carries that frame across steps).
inline Mat2 motion_rotation(const Vec2& dp, const Mat2& prev) {
  require(finite(dp), "motion_rotation: non-finite displacement");
  const double n = dp.norm();
  if (n < 1e-6) return prev;
  const double cx = dp[0] / n;
  const double cy = dp[1] / n;
  Mat2 r;
  r << cx, -cy, cy, cx;
  return r;
}

// World-frame stiffness matrix: diag(k1, k2) expressed in the motion-aligned
// frame. k1's eigenvector points along dp.
inline Mat2 map_action_stiffness(const ActionStiffness& a, const Vec2& dp,
                                 const Mat2& prev_rotation = Mat2::Identity()) {
  require(finite(a.k1) && finite(a.k2), "map_action_stiffness: non-finite stiffness");
  require(a.k1 >= kStiffMin && a.k1 <= kStiffMax && a.k2 >= kStiffMin && a.k2 <= kStiffMax,
          "map_action_stiffness: stiffness outside [300, 1000] N/m");
  const Mat2 r = motion_rotation(dp, prev_rotation);
  const double c = r(0, 0), s = r(1, 0);
  // Closed-form R diag(k1,k2) R^T; one shared off-diagonal expression keeps
  // the result exactly symmetric.
  Mat2 k;
  k(0, 0) = a.k1 * c * c + a.k2 * s * s;
  k(1, 1) = a.k1 * s * s + a.k2 * c * c;
  k(0, 1) = k(1, 0) = (a.k1 - a.k2) * c * s;
  return k;
}

inline Wrench elastic_wrench(const Mat2& k, const Vec2& pos_error) {
  require(finite(k) && finite(pos_error), "elastic_wrench: non-finite input");
  return Wrench{k * pos_error};
}

// Damping with eigenvalues 2*zeta*sqrt(m*k_i) on the same eigenvectors as K.
// Uses the closed-form principal square root of an SPD 2x2:
//   sqrtm(K) = (K + sqrt(det K) I) / sqrt(tr K + 2 sqrt(det K))
inline Mat2 damping_from_stiffness(const Mat2& k, double mass, double zeta) {
  require(finite(k), "damping_from_stiffness: non-finite stiffness");
  require(finite(mass) && mass > 0.0, "damping_from_stiffness: mass must be positive");
  require(finite(zeta) && zeta > 0.0, "damping_from_stiffness: damping ratio must be positive");
  const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
  const double tr = k(0, 0) + k(1, 1);
  require(det > 0.0 && tr > 0.0, "damping_from_stiffness: stiffness must be positive definite");
  const double s = std::sqrt(det);
  const double t = std::sqrt(tr + 2.0 * s);
  return (2.0 * zeta * std::sqrt(mass) / t) * (k + s * Mat2::Identity());
}

// Commanded force: scaled spring pull minus damping. `scale` is the passivity
// layer's output in [0, 1]; 1.0 reproduces the unfiltered controller exactly.
inline Vec2 impedance_force(const Mat2& k, const Mat2& d, const Vec2& pos_error, const Vec2& vel,
                            double scale) {
  require(finite(pos_error) && finite(vel), "impedance_force: non-finite state");
  require(finite(scale) && scale >= 0.0 && scale <= 1.0,
          "impedance_force: scale outside [0, 1]");
  return scale * (k * pos_error - d * vel);
}

}  // namespace tankguard
