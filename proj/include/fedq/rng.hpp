#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedq {

// Random stream used everywhere in the simulator. The engine is
// std::mt19937_64, whose output sequence is fixed by the C++ standard; all
// derived draws (uniform reals, exponentials, indices) are computed here from
// raw 64-bit outputs so results do not depend on a particular standard
// library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard exponential via inversion: -log(1 - u), u in [0, 1).
  double exponential() { return -std::log1p(-uniform01()); }

  // Uniform index in [0, n).
  std::size_t below(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; derives independent stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fedq
