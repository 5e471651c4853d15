#include "rmtu/randmat.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace rmtu::randmat {

using linalg::Index;
using linalg::Vec;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Mat standard_normal(RngStream& rng, Index rows, Index cols) {
  Mat z(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) z(i, j) = rng.normal();
  }
  return z;
}

}  // namespace

MatrixNormalParams::MatrixNormalParams(Mat m, SpdMat row, SpdMat col)
    : mean(std::move(m)), row_cov(std::move(row)), col_cov(std::move(col)) {
  if (row_cov.dim() != mean.rows() || col_cov.dim() != mean.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "matrix normal covariances do not match the mean shape");
  }
}

double matnorm_logpdf(const Mat& x, const MatrixNormalParams& p) {
  if (x.rows() != p.mean.rows() || x.cols() != p.mean.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "matrix normal argument has the wrong shape");
  }
  const double rows = static_cast<double>(x.rows());
  const double cols = static_cast<double>(x.cols());
  // tr(Sigma^-1 E Psi^-1 E^T) = ||U_S^-T E U_P^-1||_F^2 for Sigma = U_S^T U_S.
  Mat e = x - p.mean;
  Mat left = p.row_cov.upper_factor().transpose().triangularView<Eigen::Lower>().solve(e);
  Mat whitened =
      p.col_cov.upper_factor().transpose().triangularView<Eigen::Lower>().solve(left.transpose());
  return -0.5 * rows * cols * kLog2Pi - 0.5 * cols * p.row_cov.log_det() -
         0.5 * rows * p.col_cov.log_det() - 0.5 * whitened.squaredNorm();
}

Mat matnorm_sample(RngStream& rng, const MatrixNormalParams& p) {
  Mat z = standard_normal(rng, p.mean.rows(), p.mean.cols());
  return p.mean + p.row_cov.upper_factor().transpose() * z * p.col_cov.upper_factor();
}

WishartParams::WishartParams(double d, SpdMat s) : dof(d), scale(std::move(s)) {
  if (!std::isfinite(dof) || dof < static_cast<double>(scale.dim())) {
    throw Error(ErrorKind::DofTooSmall, "Wishart degrees of freedom must be >= dimension");
  }
}

double wishart_logpdf(const Mat& s, const WishartParams& p) {
  const SpdMat spd(s);
  if (spd.dim() != p.scale.dim()) {
    throw Error(ErrorKind::ShapeMismatch, "Wishart argument has the wrong dimension");
  }
  const double dim = static_cast<double>(spd.dim());
  const double d = p.dof;
  // tr(Sigma^-1 S) via the scale's Cholesky factor.
  Mat w = p.scale.upper_factor().transpose().triangularView<Eigen::Lower>().solve(
      spd.upper_factor().transpose());
  return -0.5 * d * dim * std::log(2.0) -
         specfun::log_multivariate_gamma(static_cast<int>(spd.dim()), 0.5 * d) -
         0.5 * d * p.scale.log_det() + 0.5 * (d - dim - 1.0) * spd.log_det() -
         0.5 * w.squaredNorm();
}

SpdMat wishart_sample(RngStream& rng, const WishartParams& p) {
  const Index n = p.scale.dim();
  Mat a = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = std::sqrt(rng.gamma(0.5 * (p.dof - static_cast<double>(i)), 2.0));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Mat la = p.scale.upper_factor().transpose() * a;
  Mat s = la * la.transpose();
  return SpdMat(0.5 * (s + s.transpose()));
}

double mvn_logpdf(const Vec& x, const Vec& mean, const SpdMat& cov) {
  if (x.size() != mean.size() || cov.dim() != x.size()) {
    throw Error(ErrorKind::ShapeMismatch, "multivariate normal shapes disagree");
  }
  Vec w = cov.upper_factor().transpose().triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * cov.log_det() -
         0.5 * w.squaredNorm();
}

}  // namespace rmtu::randmat
