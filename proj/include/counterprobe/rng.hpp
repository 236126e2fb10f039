#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "counterprobe/digest.hpp"

namespace counterprobe {

// Seeded generator with a platform-independent draw sequence.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Standard distributions are not, so bounded draws use plain
// rejection sampling on the raw 64-bit output instead.
//
// Substreams: substream(key) seeds a fresh generator with
// mix64(seed ^ fnv1a64(key)), so each occupation draws independently of
// every other and of iteration order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  Rng substream(std::string_view key) const { return Rng(mix64(seed_ ^ fnv1a64(key))); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace counterprobe
