#pragma once

#include <cstdint>

#include "dynpar/engine/location.hpp"

namespace dynpar {

// Repeatable coin flips: a pure function of (seed, round, id), so re-executed
// computations see the same coins as the original run.
class CoinOracle {
 public:
  explicit constexpr CoinOracle(std::uint64_t seed = 0) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }

  constexpr bool heads(Round round, std::uint32_t id) const {
    std::uint64_t x = seed_ ^ mix((std::uint64_t{round} << 32) | id);
    return (mix(x) >> 63) != 0;
  }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace dynpar
