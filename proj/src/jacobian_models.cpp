#include "rmtu/jacobian_models.hpp"

#include <cmath>
#include <string>

namespace rmtu::motion {

using linalg::Index;

namespace {

void require_square(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::Unsupported,
                "rectangular (redundant) Jacobians are not supported by the random models");
  }
}

// mean_M plus a noise matrix whose rows are independent N(0, cov). Redraws
// numerically singular results.
Mat perturb_rows(RngStream& rng, const Mat& mean_M, const SpdMat& cov) {
  const Index n = mean_M.rows();
  const Mat& upper = cov.upper_factor();
  for (int attempt = 0; attempt < kMaxSingularRedraws; ++attempt) {
    Mat z(n, mean_M.cols());
    for (Index j = 0; j < z.cols(); ++j) {
      for (Index i = 0; i < n; ++i) z(i, j) = rng.normal();
    }
    Mat draw = mean_M + z * upper;
    Eigen::PartialPivLU<Mat> plu(draw);
    const double rcond = plu.rcond();
    if (rcond > 0.0 && 1.0 / rcond <= kSingularDrawCondition) return draw;
  }
  throw Error(ErrorKind::SingularDraw, "perturbed matrix stayed singular after " +
                                           std::to_string(kMaxSingularRedraws) + " draws");
}

}  // namespace

MaxEntWishartModel::MaxEntWishartModel(double dispersion, int n)
    : dispersion_(dispersion),
      n_(n),
      theta_(maxent_theta(dispersion, SpdMat::identity(n))),
      law_(theta_ + n + 1.0, SpdMat(Mat::Identity(n, n) / (theta_ + n + 1.0))) {}

GaussianNoiseMatrixModel::GaussianNoiseMatrixModel(double u, double alpha, NoiseTarget t)
    : norm_bound(u), uncertainty_scale(alpha), target(t) {
  if (!(u > 0.0) || !std::isfinite(u)) {
    throw Error(ErrorKind::DomainError, "norm bound u must be positive");
  }
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw Error(ErrorKind::DomainError, "uncertainty scale alpha must lie in (0, 1]");
  }
}

const char* model_name(const RandomJacobianModel& model) {
  switch (model.index()) {
    case 0: return "additive-gaussian";
    case 1: return "rmt-wishart";
    default: return "rmt-gaussian";
  }
}

double maxent_theta(double sigma_B, const SpdMat& mean_B) {
  if (!(sigma_B > 0.0) || !std::isfinite(sigma_B)) {
    throw Error(ErrorKind::DomainError, "dispersion must be positive");
  }
  const Mat& b = mean_B.matrix();
  const double tr = b.trace();
  const double tr_sq = (b * b).trace();
  const double n = static_cast<double>(mean_B.dim());
  const double theta = (1.0 + tr * tr / tr_sq) / (sigma_B * sigma_B) - (n + 1.0);
  if (!(theta > 0.0)) {
    throw Error(ErrorKind::DispersionTooLarge,
                "dispersion " + std::to_string(sigma_B) + " gives theta <= 0");
  }
  return theta;
}

Mat maxent_sample_jacobian(RngStream& rng, const MaxEntWishartModel& model, const Mat& mean_J) {
  require_square(mean_J);
  if (mean_J.rows() != model.n()) {
    throw Error(ErrorKind::ShapeMismatch, "mean Jacobian does not match the model dimension");
  }
  const linalg::Factorization split = linalg::lu_decompose(mean_J);
  const SpdMat b = randmat::wishart_sample(rng, model.perturbation_law());
  return split.left * b.matrix() * split.right;
}

SpdMat gaussian_noise_covariance(const GaussianNoiseMatrixModel& model, const Mat& mean_M) {
  require_square(mean_M);
  const double norm = linalg::frobenius_norm(mean_M);
  const double u = model.norm_bound;
  if (norm >= u) {
    throw Error(ErrorKind::NormBoundViolated, "||mean||_F = " + std::to_string(norm) +
                                                  " reaches the bound u = " + std::to_string(u));
  }
  const double n = static_cast<double>(mean_M.rows());
  const double alpha = model.uncertainty_scale;
  const double beta = alpha * alpha * (u * u - norm * norm);
  return SpdMat(Mat::Identity(mean_M.rows(), mean_M.rows()) * (beta / (n * n)));
}

Mat gaussian_sample_jacobian(RngStream& rng, const GaussianNoiseMatrixModel& model,
                             const Mat& mean_J) {
  require_square(mean_J);
  if (model.target == NoiseTarget::Jacobian) {
    return perturb_rows(rng, mean_J, gaussian_noise_covariance(model, mean_J));
  }
  const Mat mean_inv = linalg::inverse(mean_J);
  return linalg::inverse(perturb_rows(rng, mean_inv, gaussian_noise_covariance(model, mean_inv)));
}

JointState propagate(RngStream& rng, const RandomJacobianModel& model,
                     const PropagationContext& ctx, const JacobianFn& jacobian_fn) {
  if (!(ctx.dt > 0.0)) throw Error(ErrorKind::DomainError, "dt must be positive");
  const Mat mean_J = jacobian_fn(ctx.q);
  const Vec& xdot = ctx.desired_ee_velocity;

  if (const auto* add = std::get_if<AdditiveGaussianModel>(&model)) {
    Vec z(ctx.q.size());
    for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return ctx.q + linalg::solve(mean_J, xdot) * ctx.dt + add->noise_cov.sqrt_factor() * z;
  }
  if (const auto* wish = std::get_if<MaxEntWishartModel>(&model)) {
    const Mat drawn = maxent_sample_jacobian(rng, *wish, mean_J);
    return ctx.q + linalg::solve(drawn, xdot) * ctx.dt;
  }
  const auto& gauss = std::get<GaussianNoiseMatrixModel>(model);
  require_square(mean_J);
  if (gauss.target == NoiseTarget::Jacobian) {
    const Mat drawn = perturb_rows(rng, mean_J, gaussian_noise_covariance(gauss, mean_J));
    return ctx.q + linalg::solve(drawn, xdot) * ctx.dt;
  }
  const Mat mean_inv = linalg::inverse(mean_J);
  const Mat drawn_inv = perturb_rows(rng, mean_inv, gaussian_noise_covariance(gauss, mean_inv));
  return ctx.q + drawn_inv * xdot * ctx.dt;
}

JointState propagate_deterministic(const PropagationContext& ctx, const JacobianFn& jacobian_fn) {
  return ctx.q + linalg::solve(jacobian_fn(ctx.q), ctx.desired_ee_velocity) * ctx.dt;
}

}  // namespace rmtu::motion
