#ifndef SACNET_RANDOM_HPP_
#define SACNET_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace sacnet {

// The engine's output sequence is fixed by the standard; the conversions
// below are spelled out so draws are identical across standard libraries.
using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, bound).
inline uint64_t uniform_index(Rng& rng, uint64_t bound) {
  return static_cast<uint64_t>(uniform01(rng) * static_cast<double>(bound));
}

// Standard normal via Box-Muller.
inline double normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline bool coin(Rng& rng, double p = 0.5) { return uniform01(rng) < p; }

template <typename V>
void shuffle(std::vector<V>& values, Rng& rng) {
  for (size_t i = values.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace sacnet

#endif  // SACNET_RANDOM_HPP_
