#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sodbench {

// FNV-1a, used to key child streams off attack/model identifiers.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<std::uint8_t>(c);
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

// The repository-wide pseudo-random generator. One fixed algorithm
// (splitmix64) so that a seed reproduces the same sample sequence on every
// platform:
//
//   state += 0x9E3779B97F4A7C15
//   z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//
// Streams are single-owner and never shared between threads. Parallel code
// derives independent child streams with split(key); a child depends only on
// the parent's construction seed and the key, never on how many draws the
// parent has made, so fan-out order cannot change results.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // Order-independent combination of a seed and a key, used for stream
  // splitting and for counter-based per-entry noise kernels.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t key) {
    return mix(seed + 0x9E3779B97F4A7C15ULL * (key + 1));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller from two consecutive draws; u1 is shifted into (0, 1] so the
  // log never sees zero. No spare caching: each call consumes exactly two
  // 64-bit draws.
  double normal(double mean, double sigma) {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Child stream keyed off the construction seed. Pure: does not advance
  // this stream.
  RngStream split(std::uint64_t key) const { return RngStream(derive(seed_, key)); }

  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace sodbench
