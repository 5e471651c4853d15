#pragma once

#include <functional>
#include <variant>

#include "rmtu/linalg.hpp"
#include "rmtu/randmat.hpp"
#include "rmtu/specfun.hpp"

namespace rmtu::motion {

using linalg::CovMat;
using linalg::Mat;
using linalg::SpdMat;
using linalg::Vec;

/// Joint angles (rad) of the serial chain.
using JointState = Vec;

/// q_{k+1} = q_k + J(q_k)^-1 xdot dt + w, w ~ N(0, noise_cov).
struct AdditiveGaussianModel {
  CovMat noise_cov;
};

/// Random Jacobian J = J1 B J2 with J1 J2 the LU split of the mean Jacobian
/// and B ~ W_n(theta + n + 1, I / (theta + n + 1)), so E[B] = I.
class MaxEntWishartModel {
 public:
  MaxEntWishartModel(double dispersion, int n);

  double dispersion() const noexcept { return dispersion_; }
  int n() const noexcept { return n_; }
  double theta() const noexcept { return theta_; }
  const randmat::WishartParams& perturbation_law() const noexcept { return law_; }

 private:
  double dispersion_;
  int n_;
  double theta_;
  randmat::WishartParams law_;
};

enum class NoiseTarget { Jacobian, InverseJacobian };

/// Mean matrix plus a zero-mean Gaussian noise matrix with independent rows,
/// its covariance set by the entropy-maximizing trace budget.
struct GaussianNoiseMatrixModel {
  GaussianNoiseMatrixModel(double norm_bound, double uncertainty_scale, NoiseTarget target);

  double norm_bound;         // u
  double uncertainty_scale;  // alpha in (0, 1]
  NoiseTarget target;
};

using RandomJacobianModel =
    std::variant<AdditiveGaussianModel, MaxEntWishartModel, GaussianNoiseMatrixModel>;

const char* model_name(const RandomJacobianModel& model);

struct PropagationContext {
  JointState q;
  Vec desired_ee_velocity;
  double dt = 0.0;
};

using JacobianFn = std::function<Mat(const JointState&)>;

inline constexpr int kMaxSingularRedraws = 100;
inline constexpr double kSingularDrawCondition = 1e12;

/// theta = (1 + tr(B)^2 / tr(B^2)) / sigma_B^2 - (n + 1). Throws
/// DispersionTooLarge when theta <= 0.
double maxent_theta(double sigma_B, const SpdMat& mean_B);

Mat maxent_sample_jacobian(RngStream& rng, const MaxEntWishartModel& model, const Mat& mean_J);

/// Maximizer of ln|Sigma| subject to tr(n Sigma) <= beta,
/// beta = alpha^2 (u^2 - ||mean_M||_F^2): Sigma = (beta / n^2) I.
SpdMat gaussian_noise_covariance(const GaussianNoiseMatrixModel& model, const Mat& mean_M);

/// Draws the random Jacobian. For the inverse target the noise is added to
/// mean_J^-1 and the perturbed inverse is inverted back.
Mat gaussian_sample_jacobian(RngStream& rng, const GaussianNoiseMatrixModel& model,
                             const Mat& mean_J);

/// One step of the chosen stochastic inverse differential kinematics.
JointState propagate(RngStream& rng, const RandomJacobianModel& model,
                     const PropagationContext& ctx, const JacobianFn& jacobian_fn);

/// Propagation with every noise source removed.
JointState propagate_deterministic(const PropagationContext& ctx, const JacobianFn& jacobian_fn);

}  // namespace rmtu::motion
