#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace pcbev {

/// FNV-1a over the raw bytes of a float buffer. Used to pin outputs in
/// benchmarks and regression fixtures; sensitive to every bit.
inline std::uint64_t fnv1a64(std::span<const float> values,
                             std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 4; ++b) {
      hash ^= (bits >> (8 * b)) & 0xffu;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

inline std::uint64_t fnv1a64_bytes(std::span<const unsigned char> bytes,
                                   std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace pcbev
