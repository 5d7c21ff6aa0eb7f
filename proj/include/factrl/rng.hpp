#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace factrl::rng {

// 64-bit FNV-1a over raw bytes. Used for stream derivation and for
// config/file fingerprints; not cryptographic.
constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a(std::string_view bytes, uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(uint64_t v);

// splitmix64. Identical output on every platform, which the byte-level
// reproducibility contracts depend on (std::shuffle and friends are
// implementation-defined).
class Stream {
 public:
  explicit Stream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0,1) with 53 random bits
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // uniform in [0,n)
  uint64_t below(uint64_t n);

 private:
  uint64_t state_;
};

// Derives an independent stream from (seed, tag, a, b). Distinct arguments
// give decorrelated streams, so per-record / per-rollout consumers are
// reproducible regardless of scheduling.
Stream derive(uint64_t seed, std::string_view tag, uint64_t a = 0, uint64_t b = 0);

}  // namespace factrl::rng
