#pragma once

#include <Eigen/Dense>

#include "rmtu/error.hpp"

namespace rmtu::linalg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPivotFloor = 1e-12;
inline constexpr double kSymmetryTol = 1e-12;

/// Symmetric positive definite matrix. Construction validates symmetry
/// (relative to the Frobenius norm) and runs a Cholesky factorization; the
/// stored matrix is exactly symmetrized.
class SpdMat {
 public:
  explicit SpdMat(const Mat& m);

  static SpdMat identity(Index n);

  const Mat& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }
  /// Upper-triangular U with U^T U equal to the matrix.
  const Mat& upper_factor() const noexcept { return upper_; }
  double log_det() const;
  Mat inverse() const;

 private:
  Mat m_;
  Mat upper_;
};

/// Symmetric positive semi-definite matrix (covariances that may be zero).
/// Keeps a lower square-root factor L with L L^T equal to the matrix.
class CovMat {
 public:
  explicit CovMat(const Mat& m);
  CovMat(const SpdMat& s) : CovMat(s.matrix()) {}  // NOLINT(implicit)

  static CovMat zero(Index n) { return CovMat(Mat::Zero(n, n)); }

  const Mat& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }
  const Mat& sqrt_factor() const noexcept { return factor_; }

 private:
  Mat m_;
  Mat factor_;
};

/// Column stacking: columns a_1..a_q of A, top to bottom.
Vec vec(const Mat& a);

Mat kron(const Mat& a, const Mat& b);

enum class FactorKind { DoolittleLU, QR };

/// A = left * right. For DoolittleLU, left is unit lower triangular and
/// right upper triangular; for QR, left is orthogonal and right upper
/// triangular.
struct Factorization {
  Mat left;
  Mat right;
  FactorKind kind = FactorKind::DoolittleLU;
};

/// Doolittle LU without pivoting. Falls back to QR when a pivot drops under
/// kPivotFloor * ||A||_F but the matrix itself is nonsingular; throws
/// SingularMatrix when it is not.
Factorization lu_decompose(const Mat& a);

/// Upper-triangular U with U^T U = S. Throws NotPositiveDefinite when a
/// leading minor is not positive.
Mat cholesky(const Mat& s);

inline double frobenius_norm(const Mat& a) { return a.norm(); }

bool is_symmetric(const Mat& a, double rel_tol = kSymmetryTol);

/// Ratio of extreme singular values; +inf for singular input.
double condition_number(const Mat& a);

/// Inverse through partial-pivot LU. Throws SingularMatrix on a pivot
/// below kPivotFloor * ||A||_F.
Mat inverse(const Mat& a);

/// Solves A x = b with the same singularity policy as inverse().
Vec solve(const Mat& a, const Vec& b);

}  // namespace rmtu::linalg
