#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmtu/manipulator.hpp"

namespace rmtu::calibration {

using linalg::Mat;
using linalg::SpdMat;
using linalg::Vec;

/// One-step prediction residuals of a measured ensemble. omegas[i][k] is
/// omega_{k+1} of run i, predicted from the state at step k minus the state
/// at step k + 1. mean_jacobians[i][k] is J(q~_k^i).
struct NoiseEnsemble {
  std::vector<std::vector<Vec>> omegas;
  std::vector<std::vector<Mat>> mean_jacobians;

  std::size_t runs() const noexcept { return omegas.size(); }
  std::size_t steps() const noexcept { return omegas.empty() ? 0 : omegas.front().size(); }
};

/// alpha1/alpha2 weigh data fit against distance from identity when a
/// perturbation matrix is recovered. beta1/beta2 weigh mean against
/// covariance mismatch when the Gaussian model is fitted.
struct CalibrationWeights {
  double alpha1 = 0.5;
  double alpha2 = 0.5;
  double beta1 = 0.5;
  double beta2 = 0.5;

  /// Throws DomainError unless each pair is non-negative and sums to 1.
  void validate() const;
};

NoiseEnsemble extract_process_noise(const manipulator::Ensemble& ensemble,
                                    const manipulator::TrajectoryTask& task,
                                    const manipulator::ChainSpec& chain);

/// Mean over steps of the per-step sample covariance of omega. A
/// semi-definite result is nudged to SPD with 1e-15 I.
SpdMat estimate_sigma_omega(const NoiseEnsemble& noise);

/// alpha1 ||omega - (J2^-1 X J1^-1 - J^-1) v|| + alpha2 ||X - I||_F with
/// X = B^-1, v = xdot dt and J = J1 J2 the split used by the Wishart model.
double recover_objective(const Mat& b_inverse, const Vec& omega, const Mat& mean_J,
                         const Vec& ee_vel, double dt, const CalibrationWeights& w);

/// Eigenvalue floor for B^-1 when the optimum lies on the boundary of the
/// SPD cone.
inline constexpr double kMinInverseEigenvalue = 1e-6;

/// Sample of the perturbation matrix: the SPD B whose inverse minimizes
/// recover_objective.
SpdMat recover_B(const Vec& omega, const Mat& mean_J, const Vec& ee_vel, double dt,
                 const CalibrationWeights& w);

/// sqrt(mean ||B - I||_F^2 / n) over the samples of one step. Throws
/// InsufficientSamples for fewer than two samples.
double dispersion_at_step(std::span<const SpdMat> samples);

/// Time average of dispersion_at_step over steps.
double estimate_dispersion(const std::vector<std::vector<SpdMat>>& per_step);

struct GaussianFitOptions {
  std::vector<double> u_tilde_grid{0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> alpha_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  std::size_t inner_runs = 100;
  std::size_t refine_iterations = 24;
  motion::NoiseTarget target = motion::NoiseTarget::InverseJacobian;
  std::uint64_t inner_seed = 0x5eed;
};

struct GaussianFit {
  double u = 0.0;
  double u_tilde = 0.0;
  double alpha = 0.0;
  double objective = 0.0;
};

/// Mean over steps of beta1 ||mean_model - mean_data|| +
/// beta2 |tr(Cov_model - Cov_data)|. The model ensemble is simulated with
/// `inner_runs` runs from a fixed seed.
double gaussian_fit_objective(const manipulator::Ensemble& data,
                              const manipulator::TrajectoryTask& task,
                              const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                              double u, double alpha, const GaussianFitOptions& opt);

/// Grid search over (u_tilde, alpha) followed by a shrinking pattern search in
/// log space. u = jac_norm_max + u_tilde, with jac_norm_max the largest norm
/// of the mean target matrix along the task.
GaussianFit fit_gaussian_params(const manipulator::Ensemble& data,
                                const manipulator::TrajectoryTask& task,
                                const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                                double jac_norm_max, const GaussianFitOptions& opt = {});

/// Largest ||J^-1||_F (or ||J||_F for the Jacobian target) along the
/// deterministic path of the task.
double max_target_norm(const manipulator::ChainSpec& chain, const manipulator::TrajectoryTask& task,
                       motion::NoiseTarget target);

struct CalibrateOptions {
  GaussianFitOptions gaussian;
  /// Divide omega and xdot dt by the nominal joint step ||J^-1 xdot dt||
  /// before recovering B, so the fit and regularizer terms are both
  /// dimensionless.
  bool relative_residuals = true;
};

struct CalibrationResult {
  SpdMat sigma_omega{SpdMat::identity(3)};
  double sigma_B = 0.0;
  std::vector<double> sigma_B_per_step;
  GaussianFit gaussian;
  CalibrationWeights weights;
};

/// Full pipeline: residual extraction, Sigma_omega, per-sample B recovery and
/// dispersion, then the Gaussian model fit.
CalibrationResult calibrate(const manipulator::Ensemble& data, const manipulator::TrajectoryTask& task,
                            const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                            const CalibrateOptions& opt = {});

}  // namespace rmtu::calibration
