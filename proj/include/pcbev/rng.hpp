#pragma once

#include <cstdint>
#include <random>

namespace pcbev {

/// Portable uniform draws on top of mt19937_64. The std distributions are
/// implementation-defined, so seeded weights and scans go through this.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

}  // namespace pcbev
