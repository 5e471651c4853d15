#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rmtu/linalg.hpp"

namespace rmtu::stats {

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Coefficient of variation with the sample standard deviation.
inline double coeff_of_variation(std::span<const double> xs) {
  const double m = mean(xs);
  return m == 0.0 ? 0.0 : stddev(xs) / std::abs(m);
}

inline linalg::Vec mean_vector(std::span<const linalg::Vec> xs) {
  linalg::Vec m = linalg::Vec::Zero(xs.front().size());
  for (const auto& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

/// Unbiased sample covariance; zero for fewer than two samples.
inline linalg::Mat sample_covariance(std::span<const linalg::Vec> xs) {
  const auto n = xs.front().size();
  linalg::Mat c = linalg::Mat::Zero(n, n);
  if (xs.size() < 2) return c;
  const linalg::Vec m = mean_vector(xs);
  for (const auto& x : xs) c += (x - m) * (x - m).transpose();
  return c / static_cast<double>(xs.size() - 1);
}

}  // namespace rmtu::stats
