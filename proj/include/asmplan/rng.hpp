// Deterministic RNG (splitmix64 core) so seeded runs replay identically
// across standard library versions.
#pragma once

#include <cstdint>

namespace asmplan {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x5dull) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  Rng fork(std::uint64_t stream) { return Rng(next_u64() ^ (stream * 0x9e3779b97f4a7c15ull)); }

 private:
  std::uint64_t state_;
};

}  // namespace asmplan
