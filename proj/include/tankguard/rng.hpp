#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tankguard {

// Deterministic RNG. mt19937_64 supplies the bits; the float/normal draws are
// spelled out here instead of going through std::uniform_real_distribution /
// std::normal_distribution, whose outputs vary across standard libraries.
// Every artifact we write must be reproducible bit-for-bit from (seed, config),
// so the distribution math has to be pinned in this repo.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller. No spare-value caching: one draw consumes
  // exactly two engine outputs, so the stream position never depends on call
  // history.
  double normal() {
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Derive an independent sub-stream (episode seeds, per-net init seeds, ...).
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    // splitmix64 over seed ^ golden-ratio-scrambled stream index.
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tankguard
