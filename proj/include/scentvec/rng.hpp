#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "scentvec/errors.hpp"

namespace scentvec {

/// Every randomized operation takes an explicit generator, so whole runs are
/// reproducible from one seed. mt19937_64 output is pinned by the standard;
/// the helpers below avoid std::uniform_*_distribution, whose results are
/// implementation-defined.
using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derives a decorrelated stream seed from a base seed and up to two tags.
/// Per-task streams seeded this way stay reproducible under one run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag0, std::uint64_t tag1 = 0) {
  std::uint64_t s = base;
  detail::splitmix64(s);
  s ^= (tag0 + 1) * 0x9e3779b97f4a7c15ULL;
  detail::splitmix64(s);
  s ^= (tag1 + 1) * 0xc2b2ae3d27d4eb4fULL;
  return detail::splitmix64(s);
}

/// Uniform double in [0, 1) with 53-bit resolution.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Unbiased integer in [0, n); rejection sampling keeps the draw exact.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index: n must be positive");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % n;
}

/// Fisher-Yates shuffle on top of uniform_index.
template <class T>
void shuffle_inplace(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[static_cast<std::size_t>(uniform_index(rng, i))]);
  }
}

/// Draws an index from a cumulative-weight array (non-decreasing, positive total).
inline std::size_t sample_cdf(std::span<const double> cdf, Rng& rng) {
  if (cdf.empty()) throw ContractError("sample_cdf: empty distribution");
  const double u = uniform_unit(rng) * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const auto idx = static_cast<std::size_t>(it - cdf.begin());
  return std::min(idx, cdf.size() - 1);
}

}  // namespace scentvec
