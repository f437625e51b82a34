#pragma once

// Counter-based random streams. Draw i of a stream is a pure function of
// (key, i): two rounds of the splitmix64 finalizer over the keyed counter.
// Streams keyed by distinct (seed, grid, rep) triples are independent and can
// be consumed in any order, on any thread, with identical results.
//
// Normal deviates use the inverse-CDF transform: the 53-bit uniform is pushed
// through normal_quantile, the same inversion code the quantile API exposes.

#include <cstdint>

#include "ambiprice/stats.hpp"

namespace ambiprice {

namespace detail {

// splitmix64 step: golden-ratio increment followed by the bijective finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

struct NormalStream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  static NormalStream keyed(std::uint64_t seed, std::uint64_t grid_index,
                            std::uint64_t rep_index) {
    std::uint64_t k = detail::mix64(seed);
    k = detail::mix64(k ^ detail::mix64(grid_index));
    k = detail::mix64(k ^ detail::mix64(rep_index));
    return NormalStream{k, 0};
  }

  // Strictly inside (0,1): top 53 bits of the scrambled counter, centered so
  // neither endpoint is reachable.
  double next_uniform() {
    const std::uint64_t bits = detail::mix64(key ^ detail::mix64(counter++));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return normal_quantile(next_uniform()); }
};

}  // namespace ambiprice
