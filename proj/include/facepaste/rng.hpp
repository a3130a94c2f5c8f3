#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace facepaste {

// Hand-rolled draws: std::uniform_real_distribution is not bit-stable across
// standard libraries, and run reproducibility depends on these being fixed.

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller, one value per call (the sine companion is discarded)
inline double normal01(std::mt19937_64& g) {
  double u1 = 1.0 - uniform01(g);
  double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ b);
}

}  // namespace facepaste
