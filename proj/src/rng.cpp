#include "factrl/rng.hpp"

#include <cstdio>

namespace factrl::rng {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t Stream::below(uint64_t n) {
  if (n == 0) return 0;
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

Stream derive(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b) {
  uint64_t h = fnv1a_u64(seed);
  h = fnv1a(tag, h);
  h = fnv1a_u64(a, h);
  h = fnv1a_u64(b, h);
  return Stream(h);
}

}  // namespace factrl::rng
