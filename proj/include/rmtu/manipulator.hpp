#pragma once

#include <iosfwd>
#include <vector>

#include "rmtu/jacobian_models.hpp"

namespace rmtu::manipulator {

using linalg::Mat;
using linalg::Vec;
using motion::JointState;

struct JointLimit {
  double lower;
  double upper;
};

/// Planar serial chain of revolute joints; link lengths in m.
struct ChainSpec {
  ChainSpec(std::vector<double> link_lengths, std::vector<JointLimit> joint_limits);

  /// Three links with the proportions of a small educational arm and
  /// joint limits of +-pi.
  static ChainSpec reference();

  std::size_t joints() const noexcept { return link_lengths.size(); }

  std::vector<double> link_lengths;
  std::vector<JointLimit> joint_limits;
};

/// End-effector pose: position in m, orientation in rad.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
};

Pose2 forward_kinematics(const JointState& q, const ChainSpec& chain);

/// 3 x n task Jacobian of (x, y, phi). Column j is [-(y - y_j), x - x_j, 1]
/// with (x_j, y_j) the position of joint j.
Mat jacobian(const JointState& q, const ChainSpec& chain);

motion::JacobianFn jacobian_fn(const ChainSpec& chain);

double min_singular_value(const Mat& a);

struct TrajectoryTask {
  JointState q0;
  Pose2 x0;
  std::vector<Vec> ee_velocities;  // xdot^d_k, one per step
  double dt = 0.01;

  std::size_t steps() const noexcept { return ee_velocities.size(); }
};

/// Straight-line end-effector motion by `displacement` with a quintic
/// time profile. Velocities are finite differences of the path.
TrajectoryTask make_line_task(const ChainSpec& chain, const JointState& q0, const Pose2& displacement,
                              std::size_t steps, double dt);

/// 320 steps of 10 ms on the reference chain.
TrajectoryTask reference_task(const ChainSpec& chain);

enum class NoiseMode { VelocityScaled, Constant };

/// Synthetic ground truth. VelocityScaled adds w_k ~ N(0, (c ||J^-1 xdot|| dt)^2 I);
/// Constant adds w_k ~ N(0, c^2 I).
struct GroundTruthLaw {
  double noise_gain = 0.0;
  NoiseMode mode = NoiseMode::VelocityScaled;
};

using Trajectory = std::vector<JointState>;

struct Ensemble {
  double dt = 0.0;
  std::vector<Trajectory> runs;  // each holds steps + 1 states

  std::size_t steps() const noexcept { return runs.empty() ? 0 : runs.front().size() - 1; }
  /// States of every run at step k.
  std::vector<JointState> at_step(std::size_t k) const;
};

inline constexpr double kMinSingularValue = 1e-3;

Trajectory deterministic_trajectory(const ChainSpec& chain, const TrajectoryTask& task);

/// Throws NearSingularTrajectory when the nominal path gets closer than
/// kMinSingularValue to a singular Jacobian.
void check_task(const ChainSpec& chain, const TrajectoryTask& task);

/// Run r draws from seed.derive(r).
Ensemble simulate_ensemble(const RngStream& seed, const ChainSpec& chain, const TrajectoryTask& task,
                           const GroundTruthLaw& law, std::size_t runs);

/// Ensemble generated by one of the stochastic motion models.
Ensemble simulate_model_ensemble(const RngStream& seed, const ChainSpec& chain,
                                 const TrajectoryTask& task,
                                 const motion::RandomJacobianModel& model, std::size_t runs);

std::vector<Vec> ensemble_mean(const Ensemble& e);
std::vector<Mat> ensemble_covariance(const Ensemble& e);

/// CSV with columns run,k,t,q1..qn and 15 significant digits.
void write_ensemble_csv(std::ostream& out, const Ensemble& e);

}  // namespace rmtu::manipulator
