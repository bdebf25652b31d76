#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <unordered_set>
#include <vector>

#include "scentvec/errors.hpp"

namespace scentvec {

/// Weighting knob for rank-biased overlap. p close to 1 spreads weight far
/// down the lists; smaller p concentrates it near the top.
struct RboConfig {
  double p = 0.9;
  std::size_t depth = std::numeric_limits<std::size_t>::max();  // capped at list length
};

namespace detail {

template <class Token>
std::size_t rbo_eval_depth(std::span<const Token> s, std::span<const Token> t,
                           const RboConfig& config) {
  if (!(config.p > 0.0 && config.p < 1.0)) throw ContractError("rbo: p must lie in (0, 1)");
  if (config.depth < 1) throw ContractError("rbo: depth must be at least 1");
  if (s.size() != t.size()) throw ContractError("rbo: rankings must have equal length");
  if (s.empty()) throw ContractError("rbo: rankings must be non-empty");
  return std::min(config.depth, s.size());
}

// Prefix-overlap bookkeeping shared by the RBO variants. The overlap X_d at
// depth d grows only through the two elements entering at depth d: s_d joins
// the intersection iff it already sits in t's prefix and vice versa, with a
// single increment when s_d == t_d.
template <class Token>
struct RboAccumulator {
  explicit RboAccumulator(double p_in) : p(p_in) {}

  double p;
  double p_pow = 1.0;        // p^d
  double weighted_sum = 0.0; // sum over d of (X_d / d) p^d
  double harmonic_sum = 0.0; // sum over d of p^d / d
  std::size_t overlap = 0;   // X_d
  std::unordered_set<Token> seen_s, seen_t;

  void step(const Token& s_elem, const Token& t_elem, std::size_t depth) {
    if (!seen_s.insert(s_elem).second) {
      throw ContractError("rbo: duplicate element in first ranking");
    }
    if (!seen_t.insert(t_elem).second) {
      throw ContractError("rbo: duplicate element in second ranking");
    }
    if (s_elem == t_elem) {
      ++overlap;
    } else {
      if (seen_t.contains(s_elem)) ++overlap;
      if (seen_s.contains(t_elem)) ++overlap;
    }
    p_pow *= p;
    const double d = static_cast<double>(depth);
    weighted_sum += (static_cast<double>(overlap) / d) * p_pow;
    harmonic_sum += p_pow / d;
  }
};

}  // namespace detail

/// Extrapolated rank-biased overlap between two equal-length, duplicate-free
/// rankings, evaluated at depth k = min(config.depth, length):
///
///   RBO_EXT = (X_k / k) p^k + ((1 - p) / p) * sum_{d=1..k} (X_d / d) p^d
///
/// where X_d is the size of the intersection of the two depth-d prefixes.
/// Identical rankings score 1, disjoint rankings score 0.
template <class Token>
double rbo_ext(std::span<const Token> s, std::span<const Token> t, const RboConfig& config = {}) {
  const std::size_t k = detail::rbo_eval_depth(s, t, config);
  detail::RboAccumulator<Token> acc(config.p);
  for (std::size_t d = 0; d < k; ++d) acc.step(s[d], t[d], d + 1);
  const double kd = static_cast<double>(k);
  const double ext = (static_cast<double>(acc.overlap) / kd) * acc.p_pow +
                     ((1.0 - config.p) / config.p) * acc.weighted_sum;
  return std::clamp(ext, 0.0, 1.0);
}

/// Lower-bound variant: assumes the overlap seen at depth k never grows in
/// the unseen tail. Useful as a sensitivity check against rbo_ext.
template <class Token>
double rbo_min(std::span<const Token> s, std::span<const Token> t, const RboConfig& config = {}) {
  const std::size_t k = detail::rbo_eval_depth(s, t, config);
  detail::RboAccumulator<Token> acc(config.p);
  for (std::size_t d = 0; d < k; ++d) acc.step(s[d], t[d], d + 1);
  const double xk = static_cast<double>(acc.overlap);
  const double tail = -std::log1p(-config.p) - acc.harmonic_sum;  // sum_{d>k} p^d / d
  const double value = ((1.0 - config.p) / config.p) * (acc.weighted_sum + xk * tail);
  return std::clamp(value, 0.0, 1.0);
}

template <class Token>
double rbo_ext(const std::vector<Token>& s, const std::vector<Token>& t,
               const RboConfig& config = {}) {
  return rbo_ext(std::span<const Token>(s), std::span<const Token>(t), config);
}

template <class Token>
double rbo_min(const std::vector<Token>& s, const std::vector<Token>& t,
               const RboConfig& config = {}) {
  return rbo_min(std::span<const Token>(s), std::span<const Token>(t), config);
}

}  // namespace scentvec
