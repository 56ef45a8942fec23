#pragma once

#include <cstdint>
#include <random>

namespace flowcast {

// mt19937_64 is fully specified by the standard, so the raw stream is
// platform-stable. The distributions below are hand-rolled because the
// standard library distribution objects are not.

// Uniform double in [0, 1), an exact dyadic rational of the 53 top bits.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform double in [-1, 1).
inline double uniform_pm1(std::mt19937_64& g) { return 2.0 * uniform01(g) - 1.0; }

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller without state; draws exactly two uniforms per call.
inline double gauss(std::mt19937_64& g) {
  double u1 = uniform01(g);
  const double u2 = uniform01(g);
  if (u1 <= 0.0) u1 = 0x1.0p-54;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace flowcast
