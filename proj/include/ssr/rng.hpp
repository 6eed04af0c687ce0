#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace ssr {

// The engine is fully specified by the standard; distributions and
// std::shuffle are not, so draws go through these helpers to keep generated
// data identical across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw;
  do draw = rng();
  while (draw >= limit);
  return draw % n;
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Fisher-Yates over any random-access range.
template <typename Range>
void shuffle(Range&& items, Rng& rng) {
  for (std::size_t i = std::size(items); i > 1; --i) {
    const auto j = uniform_below(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace ssr
