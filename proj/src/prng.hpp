#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <string_view>

// Deterministic 64-bit primitives shared by every module that has to agree
// bit-for-bit across processes and machines: the SplitMix64 stepper, its
// finalizer used as a mixing function, and a keyed byte-string hash.
// None of these may change without bumping the CCBF wire version.

namespace eel {

// SplitMix64 finalizer. Bijective on 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64: state advances by the golden-ratio increment, output is the
// mixed pre-state. First output for state 0 is 0xe220a8397b1dcdaf.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += kGolden;
  return mix64(state);
}

// Keyed FNV-1a over the bytes, then one avalanche pass. Not cryptographic.
inline std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

inline std::uint64_t hash64(std::uint64_t value, std::uint64_t seed) {
  return mix64(seed ^ (mix64(value + 1) + kGolden));
}

// Small deterministic RNG stream. Thin, copyable, fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1). 53 mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Modulo bias is irrelevant at the n this project uses
  // and keeping it a single step keeps cross-implementation agreement easy.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Exponential inter-arrival sample with the given rate.
  double next_exp(double rate) {
    double u = next_double();
    // log(1-u) with u in [0,1) is finite.
    return -std::log(1.0 - u) / rate;
  }

 private:
  std::uint64_t state_;
};

// Derives a purpose-specific seed from a base seed and a label, so separate
// streams (workload, hashing, noise, ...) never alias each other.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return hash64(label, base);
}

}  // namespace eel
