#include "rmtu/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rmtu::linalg {

namespace {

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::DomainError, std::string(what) + " has non-finite entries");
  }
}

void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be square");
  }
}

double pivot_floor(const Mat& a) { return kPivotFloor * a.norm(); }

}  // namespace

bool is_symmetric(const Mat& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  return (a - a.transpose()).norm() <= rel_tol * scale;
}

SpdMat::SpdMat(const Mat& m) {
  require_square(m, "SPD matrix");
  require_finite(m, "SPD matrix");
  if (!is_symmetric(m)) {
    throw Error(ErrorKind::NotPositiveDefinite, "matrix is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
  upper_ = cholesky(m_);
}

SpdMat SpdMat::identity(Index n) { return SpdMat(Mat::Identity(n, n)); }

double SpdMat::log_det() const {
  return 2.0 * upper_.diagonal().array().log().sum();
}

Mat SpdMat::inverse() const {
  const Index n = dim();
  Mat uinv = upper_.triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));
  return uinv * uinv.transpose();
}

CovMat::CovMat(const Mat& m) {
  require_square(m, "covariance");
  require_finite(m, "covariance");
  if (!is_symmetric(m)) {
    throw Error(ErrorKind::NotPositiveDefinite, "covariance is not symmetric");
  }
  m_ = 0.5 * (m + m.transpose());
  Eigen::LLT<Mat> llt(m_);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(m_);
  const double tol = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw Error(ErrorKind::NotPositiveDefinite, "covariance has a negative eigenvalue");
  }
  Vec roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * roots.asDiagonal();
}

Vec vec(const Mat& a) {
  Vec out(a.size());
  Index k = 0;
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) out(k++) = a(i, j);
  }
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Factorization lu_decompose(const Mat& a) {
  require_square(a, "LU input");
  require_finite(a, "LU input");
  const Index n = a.rows();
  const double floor = pivot_floor(a);

  Mat lower = Mat::Identity(n, n);
  Mat upper = Mat::Zero(n, n);
  bool pivot_ok = true;
  for (Index i = 0; i < n && pivot_ok; ++i) {
    for (Index j = i; j < n; ++j) {
      upper(i, j) = a(i, j) - lower.row(i).head(i).dot(upper.col(j).head(i));
    }
    if (std::abs(upper(i, i)) <= floor) {
      pivot_ok = false;
      break;
    }
    for (Index j = i + 1; j < n; ++j) {
      lower(j, i) = (a(j, i) - lower.row(j).head(i).dot(upper.col(i).head(i))) / upper(i, i);
    }
  }
  if (pivot_ok) return {std::move(lower), std::move(upper), FactorKind::DoolittleLU};

  // No-pivot elimination broke down; decide between singular and a QR split.
  Eigen::PartialPivLU<Mat> plu(a);
  if (plu.matrixLU().diagonal().cwiseAbs().minCoeff() <= floor) {
    throw Error(ErrorKind::SingularMatrix, "pivot below floor in LU decomposition");
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  return {std::move(q), std::move(r), FactorKind::QR};
}

Mat cholesky(const Mat& s) {
  require_square(s, "Cholesky input");
  const Index n = s.rows();
  Mat u = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = s(j, j) - u.col(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      throw Error(ErrorKind::NotPositiveDefinite, "leading minor " + std::to_string(j + 1) +
                                                      " is not positive");
    }
    u(j, j) = std::sqrt(d);
    for (Index k = j + 1; k < n; ++k) {
      u(j, k) = (s(j, k) - u.col(j).head(j).dot(u.col(k).head(j))) / u(j, j);
    }
  }
  return u;
}

double condition_number(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

Mat inverse(const Mat& a) {
  require_square(a, "inverse input");
  Eigen::PartialPivLU<Mat> plu(a);
  if (plu.matrixLU().diagonal().cwiseAbs().minCoeff() <= pivot_floor(a)) {
    throw Error(ErrorKind::SingularMatrix, "matrix is singular to working precision");
  }
  return plu.inverse();
}

Vec solve(const Mat& a, const Vec& b) {
  require_square(a, "system matrix");
  Eigen::PartialPivLU<Mat> plu(a);
  if (plu.matrixLU().diagonal().cwiseAbs().minCoeff() <= pivot_floor(a)) {
    throw Error(ErrorKind::SingularMatrix, "matrix is singular to working precision");
  }
  return plu.solve(b);
}

}  // namespace rmtu::linalg
