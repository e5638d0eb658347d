#pragma once

#include <cstdint>
#include <initializer_list>

namespace sae {

/// Small counter-seeded generator (splitmix64 core). Streams are derived by
/// hashing an id path into the seed, so each (scenario, replicate, region,
/// year) gets an independent stream no matter how work is scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  /// Derive a child stream from this seed and an id path.
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = mix(seed ^ 0x2545f4914f6cdd1dULL);
    for (std::uint64_t id : ids) s = mix(s ^ mix(id + 0x9e3779b97f4a7c15ULL));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1): never returns exactly zero.
  double uniform_pos() {
    double u;
    do { u = uniform(); } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via polar Box-Muller.
  double normal();

  /// Poisson draw: inversion for small means, transformed rejection (PTRS)
  /// for large ones. Deterministic given the stream.
  std::int64_t poisson(double mean);

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sae
