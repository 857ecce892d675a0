#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "tankguard/control.hpp"
#include "tankguard/rng.hpp"

using namespace tankguard;

TEST_CASE("stiffness mapping aligns k1 with the motion direction") {
  // dp along (1,1): expected matrix computed by hand from R diag(300,1000) R^T
  // with R = [[c,-s],[s,c]], c = s = 1/sqrt(2).
  const Mat2 k = map_action_stiffness({300.0, 1000.0}, Vec2(0.02, 0.02));
  CHECK(k(0, 0) == Catch::Approx(650.0).margin(1e-9));
  CHECK(k(1, 1) == Catch::Approx(650.0).margin(1e-9));
  CHECK(k(0, 1) == Catch::Approx(-350.0).margin(1e-9));
  CHECK(k(1, 0) == Catch::Approx(-350.0).margin(1e-9));
  // (1,1) must be the 300 N/m eigenvector.
  const Vec2 dir = Vec2(1.0, 1.0).normalized();
  CHECK((k * dir - 300.0 * dir).norm() < 1e-9);
}

TEST_CASE("stiffness mapping preserves the commanded eigenvalues") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const ActionStiffness a{rng.uniform(300.0, 1000.0), rng.uniform(300.0, 1000.0)};
    const Vec2 dp(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03));
    if (dp.norm() < 1e-6) continue;
    const Mat2 k = map_action_stiffness(a, dp);
    Eigen::SelfAdjointEigenSolver<Mat2> es(k);  // independent oracle route
    const double lo = std::min(a.k1, a.k2), hi = std::max(a.k1, a.k2);
    CHECK(es.eigenvalues()[0] == Catch::Approx(lo).margin(1e-8));
    CHECK(es.eigenvalues()[1] == Catch::Approx(hi).margin(1e-8));
    // Symmetry, exactly.
    CHECK(k(0, 1) == k(1, 0));
  }
}

TEST_CASE("stiffness mapping is rotation-equivariant") {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const ActionStiffness a{rng.uniform(300.0, 1000.0), rng.uniform(300.0, 1000.0)};
    Vec2 dp(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03));
    if (dp.norm() < 1e-4) dp = Vec2(0.01, 0.0);
    const double th = rng.uniform(0.0, 6.2831853);
    Mat2 r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    const Mat2 lhs = map_action_stiffness(a, r * dp);
    const Mat2 rhs = r * map_action_stiffness(a, dp) * r.transpose();
    CHECK((lhs - rhs).norm() < 1e-8);
  }
}

TEST_CASE("stiffness mapping falls back to the previous frame for zero motion") {
  Mat2 prev;
  prev << 0.0, -1.0, 1.0, 0.0;  // 90 degree frame
  const Mat2 k = map_action_stiffness({400.0, 800.0}, Vec2(0.0, 0.0), prev);
  // k1 along prev's first column (0,1).
  const Vec2 dir(0.0, 1.0);
  CHECK((k * dir - 400.0 * dir).norm() < 1e-9);
}

TEST_CASE("stiffness mapping rejects out-of-range and non-finite input") {
  CHECK_THROWS_AS(map_action_stiffness({299.0, 500.0}, Vec2(0.01, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(map_action_stiffness({500.0, 1000.5}, Vec2(0.01, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(map_action_stiffness({500.0, 500.0}, Vec2(std::nan(""), 0.0)),
                  std::invalid_argument);
}

TEST_CASE("elastic wrench is the spring force") {
  Mat2 k = Mat2::Zero();
  k(0, 0) = 500.0;
  k(1, 1) = 500.0;
  const Wrench w = elastic_wrench(k, Vec2(0.01, 0.0));
  CHECK(w.f[0] == 5.0);
  CHECK(w.f[1] == 0.0);
  CHECK(w.norm() == 5.0);
}

TEST_CASE("damping matches 2*zeta*sqrt(m*k) per axis") {
  Mat2 k = Mat2::Zero();
  k(0, 0) = 400.0;
  k(1, 1) = 900.0;
  const Mat2 d = damping_from_stiffness(k, 1.0, 1.0);
  CHECK(d(0, 0) == Catch::Approx(40.0).margin(1e-12));
  CHECK(d(1, 1) == Catch::Approx(60.0).margin(1e-12));
  CHECK(std::abs(d(0, 1)) < 1e-12);

  Mat2 k2 = Mat2::Zero();
  k2(0, 0) = 625.0;
  k2(1, 1) = 625.0;
  const Mat2 d2 = damping_from_stiffness(k2, 4.0, 0.7);
  CHECK(d2(0, 0) == Catch::Approx(70.0).margin(1e-12));
  CHECK(d2(1, 1) == Catch::Approx(70.0).margin(1e-12));
}

TEST_CASE("damping shares eigenvectors with stiffness") {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const ActionStiffness a{rng.uniform(300.0, 1000.0), rng.uniform(300.0, 1000.0)};
    const Vec2 dp(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03));
    if (dp.norm() < 1e-4) continue;
    const Mat2 k = map_action_stiffness(a, dp);
    const Mat2 d = damping_from_stiffness(k, 1.0, 1.0);
    // Oracle: eigendecompose K with Eigen, rebuild D from 2*sqrt(k_i).
    Eigen::SelfAdjointEigenSolver<Mat2> es(k);
    Mat2 expect = Mat2::Zero();
    expect(0, 0) = 2.0 * std::sqrt(es.eigenvalues()[0]);
    expect(1, 1) = 2.0 * std::sqrt(es.eigenvalues()[1]);
    const Mat2 oracle = es.eigenvectors() * expect * es.eigenvectors().transpose();
    CHECK((d - oracle).norm() < 1e-9);
  }
}

TEST_CASE("damping rejects a zero or negative damping ratio") {
  Mat2 k = Mat2::Identity() * 500.0;
  CHECK_THROWS_AS(damping_from_stiffness(k, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(damping_from_stiffness(k, 1.0, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(damping_from_stiffness(k, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("impedance force pulls toward equilibrium and opposes velocity") {
  Mat2 k = Mat2::Identity() * 500.0;
  const Mat2 d = damping_from_stiffness(k, 1.0, 1.0);
  // Pure spring: error (0.002, 0) at 500 N/m -> 1 N along +x.
  const Vec2 f = impedance_force(k, d, Vec2(0.002, 0.0), Vec2::Zero(), 1.0);
  CHECK(f[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(f[1] == 0.0);
  // Damping term: at the equilibrium, force = -D v.
  const Vec2 f2 = impedance_force(k, d, Vec2::Zero(), Vec2(0.1, 0.0), 1.0);
  CHECK(f2[0] == Catch::Approx(-d(0, 0) * 0.1).margin(1e-12));
  // Scale 0.5 halves the whole command.
  const Vec2 f3 = impedance_force(k, d, Vec2(0.002, 0.0), Vec2(0.1, 0.0), 0.5);
  const Vec2 f4 = impedance_force(k, d, Vec2(0.002, 0.0), Vec2(0.1, 0.0), 1.0);
  CHECK(f3[0] == Catch::Approx(0.5 * f4[0]).margin(1e-15));
  CHECK(f3[1] == Catch::Approx(0.5 * f4[1]).margin(1e-15));
  // Scale 1.0 is bitwise the unfiltered controller.
  CHECK(impedance_force(k, d, Vec2(0.003, -0.001), Vec2(0.2, 0.1), 1.0) ==
        (k * Vec2(0.003, -0.001) - d * Vec2(0.2, 0.1)));
  CHECK_THROWS_AS(impedance_force(k, d, Vec2::Zero(), Vec2::Zero(), 1.5), std::invalid_argument);
}
