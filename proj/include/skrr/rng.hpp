#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace skrr {

/// One splitmix64 finalization round folding `value` into `state`.
/// Used to derive child seeds from a master seed and a token sequence;
/// the exact arithmetic is part of the reproducibility contract.
inline std::uint64_t mix64(std::uint64_t state, std::uint64_t value) {
  std::uint64_t z = state ^ (value + 0x9e3779b97f4a7c15ULL +
                             (state << 6) + (state >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a hash of a label, for mixing strings into seed derivations.
inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic stream of random draws backed by std::mt19937_64.
///
/// Every distribution below is implemented on top of next_u64() with a fixed
/// number of engine calls per draw, so a recorded draw sequence can be
/// replayed exactly on any platform:
///   - uniform01():  one engine call (top 53 bits).
///   - rademacher(): one engine call (top bit).
///   - normal():     two engine calls (Box-Muller, no caching).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// +1 or -1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  /// Standard normal via Box-Muller on two uniforms.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace skrr
