#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cmbench {

// std::mt19937_64 output is specified bit-for-bit by the standard, but the
// distribution classes are not, so draws are built on the raw engine.

/// Uniform in [0, 1): the top 53 bits of one engine output.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double low, double high) { return low + (high - low) * unit_uniform(rng); }

/// Box-Muller, one value per call.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace cmbench
