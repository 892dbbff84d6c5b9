#pragma once

#include <cstdint>
#include <random>

namespace fnh {

// Mersenne Twister (64-bit): its output sequence is fixed by the C++
// standard, so runs are reproducible across toolchains.
using Rng = std::mt19937_64;

// SplitMix64 finaliser used to derive independent seeds.
std::uint64_t mix64(std::uint64_t x);

// Generator for substream `index` of a master seed. Streams with different
// indices are decorrelated and can be consumed in any order or in parallel.
Rng substream(std::uint64_t seed, std::uint64_t index);

// Uniform in [0, 1) from the top 53 bits; avoids the implementation-defined
// std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Standard normal via Box-Muller; portable for the same reason.
double normal01(Rng& rng);

}  // namespace fnh
