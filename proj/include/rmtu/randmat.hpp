#pragma once

#include "rmtu/linalg.hpp"
#include "rmtu/specfun.hpp"

namespace rmtu::randmat {

using linalg::Mat;
using linalg::SpdMat;

/// Matrix-variate normal N_{p,q}(M, Sigma (x) Psi): vec(X^T) is multivariate
/// normal with mean vec(M^T) and covariance kron(Sigma, Psi). Sigma is the
/// p x p row covariance and Psi the q x q column covariance.
struct MatrixNormalParams {
  MatrixNormalParams(Mat mean, SpdMat row_cov, SpdMat col_cov);

  Mat mean;
  SpdMat row_cov;
  SpdMat col_cov;
};

double matnorm_logpdf(const Mat& x, const MatrixNormalParams& p);

/// X = M + A Z B^T with A A^T = Sigma, B B^T = Psi and Z standard normal.
Mat matnorm_sample(RngStream& rng, const MatrixNormalParams& p);

/// Wishart W_p(d, Sigma). Non-integer d is allowed; d >= p is required.
struct WishartParams {
  WishartParams(double dof, SpdMat scale);

  double dof;
  SpdMat scale;
};

/// Throws NotPositiveDefinite when s is not SPD.
double wishart_logpdf(const Mat& s, const WishartParams& p);

/// Bartlett construction S = L A A^T L^T, L the lower Cholesky factor of
/// the scale and A lower triangular with A_jj^2 ~ chi^2(d - j + 1).
SpdMat wishart_sample(RngStream& rng, const WishartParams& p);

/// Dense multivariate normal log density; used as the reference form of
/// the matrix-variate density.
double mvn_logpdf(const linalg::Vec& x, const linalg::Vec& mean, const SpdMat& cov);

}  // namespace rmtu::randmat
