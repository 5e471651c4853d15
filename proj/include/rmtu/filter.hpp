#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rmtu/manipulator.hpp"

namespace rmtu::filter {

using linalg::Mat;
using linalg::Vec;
using motion::JointState;

/// Shape of the drifting sensor, all in rad.
struct DriftProfile {
  double final_bias = 0.02;
  double base_std = 0.01;
  double std_amplitude = 0.005;
};

/// y_k = q_k + bias(k) + v, v ~ N(0, diag(noise_std(k)^2)), all in rad.
struct SensorModel {
  std::function<Vec(std::size_t)> bias;
  std::function<Vec(std::size_t)> noise_std;

  /// Bias ramping linearly from 0 to final_bias over `steps`, noise std
  /// base_std + std_amplitude sin(2 pi k / steps) on every joint.
  static SensorModel drifting(std::size_t steps, Eigen::Index joints = 3,
                              const DriftProfile& profile = {});
  static SensorModel constant(Vec bias, Vec noise_std);

  /// Same bias, noise std fixed at `std` on every joint. This is the
  /// nominal sensor a filter assumes when it knows the drift but not the
  /// noise fluctuation.
  SensorModel with_constant_std(double std) const;

  Vec measure(RngStream& rng, const JointState& q, std::size_t k) const;
  /// log N(y; q + bias(k), diag(noise_std(k)^2)).
  double log_likelihood(const Vec& y, const JointState& q, std::size_t k) const;
};

/// Observations y_1..y_M of a truth trajectory q_0..q_M.
std::vector<Vec> simulate_observations(const RngStream& seed, const SensorModel& sensor,
                                       const manipulator::Trajectory& truth);

struct ParticleSet {
  std::vector<JointState> states;
  std::vector<double> weights;  // normalized

  std::size_t size() const noexcept { return states.size(); }
  double ess() const;
};

enum class ResamplePolicy { None, SystematicOnLowEss };

struct FilterOptions {
  std::size_t particles = 1000;
  ResamplePolicy resample = ResamplePolicy::SystematicOnLowEss;
};

inline constexpr double kLikelihoodFloor = 1e-300;

/// Per-step posterior summaries for k = 1..M (index k - 1).
struct FilterReport {
  std::vector<Vec> mean;
  std::vector<Mat> covariance;
  std::vector<Vec> bound;  // sqrt of the covariance diagonal
  std::vector<Vec> error;  // mean - truth; empty without a truth trajectory
  std::vector<double> ess;

  std::size_t steps() const noexcept { return mean.size(); }
};

/// Sequential importance sampling from q_0 with particles propagated by
/// `model`. Particles are processed in fixed blocks, block b of step k drawing
/// from seed.derive(k).derive(b), so results do not depend on threads.
/// `truth` may be empty; otherwise it holds q_0..q_M and errors are filled.
/// A particle the model cannot propagate (singular matrix or draw, norm bound
/// violated) keeps its state with the floor likelihood. Throws
/// WeightCollapse when every particle hits the floor.
FilterReport sis_run(const RngStream& seed, const motion::RandomJacobianModel& model,
                     const SensorModel& sensor, const std::vector<Vec>& observations,
                     const manipulator::TrajectoryTask& task, const manipulator::ChainSpec& chain,
                     const manipulator::Trajectory& truth, const FilterOptions& opt = {});

struct BoundMetrics {
  double mean_abs_error = 0.0;  // rad, over runs, steps and joints
  double bound_cov = 0.0;       // coefficient of variation of the run-averaged bound, joint mean
  double bound_error_corr = 0.0;  // Pearson of run-averaged bound and |error|, joint mean
  double coverage = 0.0;        // fraction of (run, step, joint) with |error| <= bound
};

/// CSV with columns k,t,mean1..n,std1..n,err1..n,bound1..n (15 significant
/// digits). err columns are empty without a truth trajectory.
void write_report_csv(std::ostream& out, const FilterReport& report, double dt);

/// Reports must carry errors and share a step count.
BoundMetrics bound_quality_metrics(const std::vector<FilterReport>& reports);

struct ExperimentOutcome {
  std::string model;
  BoundMetrics metrics;
  std::vector<FilterReport> reports;
};

/// Runs `runs` truth trajectories under `law`, observes them with
/// `truth_sensor` and filters each with every model using `likelihood`.
/// Truth, observations and filter draws use seed.derive(0), (1) and (2).
std::vector<ExperimentOutcome> filter_experiment(
    const RngStream& seed, const manipulator::ChainSpec& chain,
    const manipulator::TrajectoryTask& task, const manipulator::GroundTruthLaw& law,
    const SensorModel& truth_sensor, const SensorModel& likelihood,
    const std::vector<motion::RandomJacobianModel>& models, std::size_t runs,
    const FilterOptions& opt = {});

}  // namespace rmtu::filter
