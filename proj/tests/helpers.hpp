#pragma once

#include <cmath>

#include "rmtu/linalg.hpp"
#include "rmtu/specfun.hpp"

namespace testing {

using rmtu::linalg::Mat;
using rmtu::linalg::Vec;

inline Mat random_matrix(rmtu::RngStream& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Mat random_spd(rmtu::RngStream& rng, Eigen::Index n, double ridge = 0.5) {
  const Mat a = random_matrix(rng, n, n);
  return a * a.transpose() + ridge * Mat::Identity(n, n);
}

inline double rel_frobenius(const Mat& a, const Mat& ref) { return (a - ref).norm() / ref.norm(); }

// Power series of I_nu(z) summed to a fixed number of terms; independent of
// the library's series/asymptotic switch.
inline double bessel_series(int nu, double z, int terms = 60) {
  double sum = 0.0;
  for (int k = 0; k < terms; ++k) {
    sum += std::exp((2.0 * k + nu) * std::log(z / 2.0) - std::lgamma(k + 1.0) - std::lgamma(k + nu + 1.0));
  }
  return sum;
}

}  // namespace testing
