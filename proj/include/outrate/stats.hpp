#pragma once

#include "outrate/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace outrate {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent generator streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for stream `stream` of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Median; even-length samples use the midpoint of the two central order
/// statistics. Requires a nonempty input.
template <typename Derived>
double median(const Eigen::DenseBase<Derived>& values) {
  std::vector<double> v(values.size());
  for (Index i = 0; i < values.size(); ++i) v[static_cast<std::size_t>(i)] = values(i);
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

template <typename Derived>
double sample_variance(const Eigen::DenseBase<Derived>& values) {
  const Index n = values.size();
  if (n < 2) return 0.0;
  const double mean = values.mean();
  double ss = 0.0;
  for (Index i = 0; i < n; ++i) ss += (values(i) - mean) * (values(i) - mean);
  return ss / static_cast<double>(n - 1);
}

template <typename Derived>
double sample_sd(const Eigen::DenseBase<Derived>& values) {
  return std::sqrt(sample_variance(values));
}

// Pearson correlation; NaN when either input has zero variance.
double pearson(const VectorXd& a, const VectorXd& b);

// Linear-interpolated quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double p);

double normal_cdf(double x);
// Inverse standard normal CDF, p in (0, 1).
double normal_quantile(double p);
double digamma(double x);

}  // namespace outrate
