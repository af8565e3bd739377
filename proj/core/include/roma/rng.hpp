// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace roma {

// Deterministic splittable PRNG. Named substreams are derived from the
// stream's root seed, not its advancing state, so the draw order in one
// stream never shifts the values produced by another.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // [0, 1), 53-bit resolution.
  double uniform01();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double gaussian();

  // Unbiased integer in [0, n), n > 0.
  uint64_t below(uint64_t n);
  // Inclusive integer range.
  int uniform_int(int lo, int hi);

  // Child stream keyed by label; independent of this stream's position.
  Rng stream(std::string_view label) const;
  // Child stream keyed by index.
  Rng fork(uint64_t index) const;

  uint64_t root() const { return root_; }

  static uint64_t mix(uint64_t a, uint64_t b);
  static uint64_t hash_str(std::string_view s);

 private:
  uint64_t root_;
  uint64_t state_;
};

}  // namespace roma
