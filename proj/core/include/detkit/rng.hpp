#pragma once

#include <cmath>
#include <cstdint>

namespace detkit {

/// Deterministic, platform-independent generator (splitmix64 core,
/// Box-Muller normals). Fixtures serialized from this generator are
/// byte-reproducible across platforms for a given seed.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal; draws two uniforms per call (no cached spare, so the
  /// stream position is a pure function of the call count).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Independent child stream, for per-image parallel generation.
  Rng fork(std::uint64_t salt) const {
    Rng child(state_ ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
    child.next_u64();
    return child;
  }

private:
  std::uint64_t state_;
};

}  // namespace detkit
