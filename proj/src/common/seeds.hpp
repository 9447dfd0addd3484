#pragma once

#include <cstdint>
#include <initializer_list>

namespace bayesrx {

// Stable seed derivation. Every consumer of randomness gets its own stream
// keyed by (base seed, stream tag, indices...), so reruns and different
// thread counts see identical draws.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(const char* s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  while (*s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*s++));
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, const char* tag,
                                 std::initializer_list<std::uint64_t> parts = {}) {
  std::uint64_t h = splitmix64(base ^ fnv1a64(tag));
  for (std::uint64_t p : parts) h = splitmix64(h ^ (p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  return h;
}

}  // namespace bayesrx
