#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scentvec/errors.hpp"

namespace scentvec {

namespace detail {

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betainc_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betainc_cf(a, b, x) / a;
  }
  return 1.0 - front * betainc_cf(b, a, 1.0 - x) / b;
}

// P(|T| > t) for Student's t with nu degrees of freedom.
inline double student_t_two_sided(double t, double nu) {
  if (!std::isfinite(t)) return 0.0;
  return betainc(0.5 * nu, 0.5, nu / (nu + t * t));
}

// 1-based midranks; tie_sum (when given) receives sum over tie groups of t^3 - t.
inline std::vector<double> midranks(std::span<const double> values, double* tie_sum = nullptr) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  double ties = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t l = i; l <= j; ++l) ranks[order[l]] = rank;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_sum) *tie_sum = ties;
  return ranks;
}

// Null distribution of the rank sum of an n-subset of ranks {1..N}:
// result[s] = number of subsets with sum s. Used for the exact test only,
// so N stays small and double counts are exact.
inline std::vector<double> rank_sum_counts(std::size_t n, std::size_t N) {
  const std::size_t max_sum = N * (N + 1) / 2;
  std::vector<std::vector<double>> dp(n + 1, std::vector<double>(max_sum + 1, 0.0));
  dp[0][0] = 1.0;
  for (std::size_t r = 1; r <= N; ++r) {
    for (std::size_t k = std::min(r, n); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= r; --s) {
        dp[k][s] += dp[k - 1][s - r];
      }
    }
  }
  return dp[n];
}

inline std::string format_csv_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

struct UTestResult {
  enum class Method { exact, normal_approx };

  double u = 0.0;           // U statistic of the first sample
  double z = 0.0;           // tie- and continuity-corrected z-score, signed
  double p_two_sided = 1.0;
  Method method = Method::normal_approx;
};

/// Mann-Whitney U via midranks. Exact two-sided p by full enumeration when
/// n + m <= 16 and the pooled sample is tie-free; otherwise the normal
/// approximation with tie and continuity corrections.
inline UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ContractError("mann_whitney_u: both samples must be non-empty");
  const double first = a[0];
  const bool all_same =
      std::all_of(a.begin(), a.end(), [&](double v) { return v == first; }) &&
      std::all_of(b.begin(), b.end(), [&](double v) { return v == first; });
  if (all_same) throw AnalysisError("mann_whitney_u: all values identical across both samples");

  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t N = n + m;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_sum = 0.0;
  const auto ranks = detail::midranks(pooled, &tie_sum);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) rank_sum_a += ranks[i];
  const double u = rank_sum_a - 0.5 * static_cast<double>(n) * (n + 1);

  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double mu = 0.5 * nm;
  const double correction = tie_sum / (static_cast<double>(N) * (N - 1.0));
  const double variance = (nm / 12.0) * (static_cast<double>(N) + 1.0 - correction);
  if (variance <= 0.0) throw AnalysisError("mann_whitney_u: zero variance under the null");
  const double sd = std::sqrt(variance);

  const double shifted = std::max(0.0, std::fabs(u - mu) - 0.5);
  const double z = (u > mu ? shifted : u < mu ? -shifted : 0.0) / sd;

  UTestResult result;
  result.u = u;
  result.z = z;
  if (N <= 16 && tie_sum == 0.0) {
    const auto counts = detail::rank_sum_counts(n, N);
    const double offset = 0.5 * static_cast<double>(n) * (n + 1);
    const double observed = std::fabs(u - mu);
    double total = 0.0;
    double tail = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (counts[s] == 0.0) continue;
      total += counts[s];
      if (std::fabs((static_cast<double>(s) - offset) - mu) >= observed - 1e-9) tail += counts[s];
    }
    result.p_two_sided = tail / total;
    result.method = UTestResult::Method::exact;
  } else {
    result.p_two_sided = std::min(1.0, 2.0 * detail::normal_sf(std::fabs(z)));
    result.method = UTestResult::Method::normal_approx;
  }
  return result;
}

struct SpearmanResult {
  double rho = 0.0;
  double p_two_sided = 1.0;
  std::size_t n = 0;
};

/// Spearman rank correlation: Pearson correlation of midranks, p-value by the
/// t-distribution approximation with n - 2 degrees of freedom.
inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("spearman: samples must have equal length");
  if (x.size() < 3) throw ContractError("spearman: need at least 3 observations");
  const std::size_t n = x.size();
  const auto rx = detail::midranks(x);
  const auto ry = detail::midranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw AnalysisError("spearman: zero rank variance");
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  SpearmanResult result;
  result.rho = rho;
  result.n = n;
  const double denom = 1.0 - rho * rho;
  if (denom <= 1e-15) {
    result.p_two_sided = 0.0;
  } else {
    const double t = rho * std::sqrt(static_cast<double>(n - 2) / denom);
    result.p_two_sided = detail::student_t_two_sided(t, static_cast<double>(n - 2));
  }
  return result;
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins spanning [min, max]; the rightmost bin is closed.
inline std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw ContractError("histogram: values must be non-empty");
  if (bins == 0) throw ContractError("histogram: bins must be positive");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn;
  const double hi = *mx;
  const double range = hi - lo;

  std::vector<HistogramBin> out(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].left = lo + range * static_cast<double>(i) / static_cast<double>(bins);
    out[i].right = lo + range * static_cast<double>(i + 1) / static_cast<double>(bins);
  }
  out.back().right = hi;
  for (const double v : values) {
    std::size_t idx = 0;
    if (range > 0.0) {
      idx = static_cast<std::size_t>((v - lo) / range * static_cast<double>(bins));
      idx = std::min(idx, bins - 1);
    }
    ++out[idx].count;
  }
  return out;
}

struct KdePoint {
  double x = 0.0;
  double density = 0.0;
};

/// Gaussian kernel density estimate with Scott's-rule bandwidth
/// (sample standard deviation times n^(-1/5)), evaluated on a uniform grid
/// spanning [min - 3h, max + 3h].
inline std::vector<KdePoint> kde(std::span<const double> values, std::size_t grid) {
  if (values.size() < 2) throw ContractError("kde: need at least 2 values");
  if (grid < 2) throw ContractError("kde: need at least 2 grid points");
  const std::size_t n = values.size();
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(n - 1);
  if (variance <= 0.0) throw AnalysisError("kde: sample has zero variance");
  const double h = std::sqrt(variance) * std::pow(static_cast<double>(n), -0.2);

  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn - 3.0 * h;
  const double hi = *mx + 3.0 * h;
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));

  std::vector<KdePoint> out(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid - 1);
    double density = 0.0;
    for (const double v : values) {
      const double zscore = (x - v) / h;
      density += std::exp(-0.5 * zscore * zscore);
    }
    out[i] = {x, density * norm};
  }
  return out;
}

inline void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "bin_left,bin_right,count\n";
  for (const auto& bin : bins) {
    out << detail::format_csv_value(bin.left) << ',' << detail::format_csv_value(bin.right)
        << ',' << bin.count << '\n';
  }
}

inline void write_kde_csv(std::ostream& out, std::span<const KdePoint> points) {
  out << "x,density\n";
  for (const auto& point : points) {
    out << detail::format_csv_value(point.x) << ',' << detail::format_csv_value(point.density)
        << '\n';
  }
}

}  // namespace scentvec
