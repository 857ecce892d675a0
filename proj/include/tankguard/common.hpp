#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

namespace tankguard {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline bool finite(double v) { return std::isfinite(v); }
inline bool finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }
inline bool finite(const Mat2& m) {
  return std::isfinite(m(0, 0)) && std::isfinite(m(0, 1)) && std::isfinite(m(1, 0)) &&
         std::isfinite(m(1, 1));
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Eigenvalues of a symmetric 2x2, ascending. Closed form; no iterative solver.
inline Vec2 sym_eigenvalues(const Mat2& m) {
  const double tr = m(0, 0) + m(1, 1);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  return Vec2(tr / 2.0 - disc, tr / 2.0 + disc);
}

// Round-trippable decimal text for a double. %.17g always survives
// text -> strtod -> identical bits, which the log/replay machinery relies on.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a, used to fingerprint configs in artifact headers.
inline uint64_t fnv1a64(const std::string& s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tankguard
