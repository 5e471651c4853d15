#pragma once

#include <cstddef>
#include <vector>

#include "rmtu/linalg.hpp"
#include "rmtu/specfun.hpp"

namespace rmtu::wrench {

using linalg::CovMat;
using linalg::Mat;
using linalg::Vec;

/// Planar cable system: agent i pulls with tension T_i ~ N(mean, std^2) (N)
/// along theta_i ~ vonMises(mean_angle, concentration), attached at offset
/// r_i (m) from the platform origin.
struct CableSystemSpec {
  std::vector<double> mean_tensions;
  std::vector<double> tension_stds;
  std::vector<double> mean_angles;
  std::vector<double> concentrations;
  std::vector<Eigen::Vector2d> offsets;  // empty means all zero

  std::size_t agents() const noexcept { return mean_tensions.size(); }
  /// Throws ShapeMismatch or DomainError.
  void validate() const;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Parameter ranges from which systems are drawn uniformly, per agent.
struct SystemBounds {
  Interval concentration;
  Interval tension_std;   // N
  Interval mean_tension;  // N
  Interval mean_angle;    // rad

  void validate() const;

  /// Ranges of the numerical design study.
  static SystemBounds design_study();
  /// Ranges identified for the three-robot experiment, configuration 1..3.
  static SystemBounds three_robot(int configuration);
};

CableSystemSpec sample_system(RngStream& rng, const SystemBounds& bounds, std::size_t m);

/// W = S T with S ~ N_{2,m}(mean_S, Sigma_S (x) Psi_S), T ~ N_m(mean_T, Sigma_T).
struct RmtWrenchModel {
  Mat mean_S;  // 2 x m, unit columns [cos; sin]
  CovMat sigma_S{Mat::Zero(2, 2)};
  CovMat psi_S{Mat::Zero(1, 1)};
  Vec mean_T;
  CovMat sigma_T{Mat::Zero(1, 1)};
};

/// Mean directions and tensions of `spec`, Sigma_T = diag(std^2), Psi_S = I.
RmtWrenchModel model_from_spec(const CableSystemSpec& spec, const CovMat& sigma_S);

/// tr{(Sigma_T + T T^T) Psi_S} Sigma_S + S Sigma_T S^T.
Mat wrench_cov_closed_form(const RmtWrenchModel& model);

struct ForceVariance {
  double fx = 0.0;  // N^2
  double fy = 0.0;  // N^2
};

/// Exact variances of the summed von Mises/Gaussian cable forces.
ForceVariance parametric_force_variance(const CableSystemSpec& spec);

/// Sum over agents of a_i = T^2 + s^2 - (r1 T)^2; equals fx + fy.
double parametric_variance_sum(const CableSystemSpec& spec);

struct Wrench {
  double fx = 0.0;  // N
  double fy = 0.0;  // N
  double mz = 0.0;  // N m
};

Wrench mc_wrench_sample(RngStream& rng, const CableSystemSpec& spec);

/// One draw of W = S T from the matrix-normal product model.
Eigen::Vector2d product_wrench_sample(RngStream& rng, const RmtWrenchModel& model);

/// Monte Carlo estimate of Cov(W) under the product model. Draws are split
/// into fixed blocks, each on seed.derive(block).
Mat product_mc_covariance(const RngStream& seed, const RmtWrenchModel& model, std::size_t draws);

/// Monte Carlo estimate of Cov([Fx, Fy]) from the cable model.
Mat cable_mc_covariance(const RngStream& seed, const CableSystemSpec& spec, std::size_t draws);

/// Analytic minimizer of ||diag Cov(W) - [Var Fx, Var Fy]|| over diagonal
/// PSD Sigma_S for one system.
Mat sigma_s_for_system(const CableSystemSpec& spec);

/// Average of sigma_s_for_system over n_mc systems drawn from `bounds`;
/// system j uses seed.derive(j).
CovMat estimate_sigma_s(const RngStream& seed, const SystemBounds& bounds, std::size_t m,
                        std::size_t n_mc);

/// ||diag Cov(W) - [Var Fx, Var Fy]|| / ||[Var Fx, Var Fy]||.
double relative_variance_error(const CableSystemSpec& spec, const CovMat& sigma_S);

struct HistogramResult {
  std::size_t m = 0;
  CovMat sigma_S{Mat::Zero(2, 2)};
  std::vector<double> errors;
  double mean = 0.0;
  double max = 0.0;
  double p95 = 0.0;
};

/// For each m: fit Sigma_S on n_train systems, then score n_test fresh ones.
std::vector<HistogramResult> error_histogram_experiment(const RngStream& seed,
                                                        const SystemBounds& bounds,
                                                        const std::vector<std::size_t>& m_list,
                                                        std::size_t n_train, std::size_t n_test);

}  // namespace rmtu::wrench
