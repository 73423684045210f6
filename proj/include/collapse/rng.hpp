// Deterministic PRNG: xoshiro256++ seeded through splitmix64, Gaussians via
// Box-Muller. Self-contained so traces are reproducible bit-for-bit per
// platform regardless of the standard library in use.
#pragma once

#include <cstdint>

namespace collapse {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal. Box-Muller; the paired value is cached.
  double gaussian();

 private:
  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace collapse
