#include "rmtu/manipulator.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "rmtu/parallel.hpp"
#include "rmtu/stats.hpp"

namespace rmtu::manipulator {

using linalg::Index;

ChainSpec::ChainSpec(std::vector<double> lengths, std::vector<JointLimit> limits)
    : link_lengths(std::move(lengths)), joint_limits(std::move(limits)) {
  if (link_lengths.empty() || link_lengths.size() != joint_limits.size()) {
    throw Error(ErrorKind::ShapeMismatch, "chain needs one joint limit per link");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw Error(ErrorKind::DomainError, "link lengths must be positive");
  }
  for (const auto& lim : joint_limits) {
    if (!(lim.lower <= lim.upper)) throw Error(ErrorKind::DomainError, "joint limit is inverted");
  }
}

ChainSpec ChainSpec::reference() {
  constexpr double pi = std::numbers::pi;
  return ChainSpec({0.155, 0.135, 0.218}, {{-pi, pi}, {-pi, pi}, {-pi, pi}});
}

Pose2 forward_kinematics(const JointState& q, const ChainSpec& chain) {
  if (static_cast<std::size_t>(q.size()) != chain.joints()) {
    throw Error(ErrorKind::ShapeMismatch, "joint vector does not match the chain");
  }
  Pose2 pose;
  for (std::size_t j = 0; j < chain.joints(); ++j) {
    const auto& lim = chain.joint_limits[j];
    if (q(j) < lim.lower || q(j) > lim.upper) {
      throw Error(ErrorKind::JointLimit, "joint " + std::to_string(j + 1) + " at " +
                                             std::to_string(q(j)) + " rad is outside its limits");
    }
    pose.phi += q(j);
    pose.x += chain.link_lengths[j] * std::cos(pose.phi);
    pose.y += chain.link_lengths[j] * std::sin(pose.phi);
  }
  return pose;
}

Mat jacobian(const JointState& q, const ChainSpec& chain) {
  const auto n = static_cast<Index>(chain.joints());
  if (q.size() != n) throw Error(ErrorKind::ShapeMismatch, "joint vector does not match the chain");
  // Joint positions, then the end effector.
  Vec px(n + 1), py(n + 1);
  px(0) = py(0) = 0.0;
  double angle = 0.0;
  for (Index j = 0; j < n; ++j) {
    angle += q(j);
    px(j + 1) = px(j) + chain.link_lengths[j] * std::cos(angle);
    py(j + 1) = py(j) + chain.link_lengths[j] * std::sin(angle);
  }
  Mat jac(3, n);
  for (Index j = 0; j < n; ++j) {
    jac(0, j) = -(py(n) - py(j));
    jac(1, j) = px(n) - px(j);
    jac(2, j) = 1.0;
  }
  return jac;
}

motion::JacobianFn jacobian_fn(const ChainSpec& chain) {
  return [chain](const JointState& q) { return jacobian(q, chain); };
}

double min_singular_value(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

TrajectoryTask make_line_task(const ChainSpec& chain, const JointState& q0,
                              const Pose2& displacement, std::size_t steps, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::DomainError, "dt must be positive");
  if (steps == 0) throw Error(ErrorKind::DomainError, "task needs at least one step");
  TrajectoryTask task;
  task.q0 = q0;
  task.x0 = forward_kinematics(q0, chain);
  task.dt = dt;
  const Vec delta = (Vec(3) << displacement.x, displacement.y, displacement.phi).finished();
  auto profile = [](double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); };
  task.ee_velocities.reserve(steps);
  const double m = static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double ds = profile((k + 1) / m) - profile(k / m);
    task.ee_velocities.push_back(delta * (ds / dt));
  }
  return task;
}

TrajectoryTask reference_task(const ChainSpec& chain) {
  const Vec q0 = (Vec(3) << 1.05, 0.73, 0.8).finished();
  return make_line_task(chain, q0, Pose2{0.117, -0.009, -0.723}, 320, 0.01);
}

std::vector<JointState> Ensemble::at_step(std::size_t k) const {
  std::vector<JointState> out;
  out.reserve(runs.size());
  for (const auto& run : runs) out.push_back(run[k]);
  return out;
}

Trajectory deterministic_trajectory(const ChainSpec& chain, const TrajectoryTask& task) {
  const auto jac = jacobian_fn(chain);
  Trajectory traj;
  traj.reserve(task.steps() + 1);
  traj.push_back(task.q0);
  for (std::size_t k = 0; k < task.steps(); ++k) {
    traj.push_back(
        motion::propagate_deterministic({traj.back(), task.ee_velocities[k], task.dt}, jac));
  }
  return traj;
}

void check_task(const ChainSpec& chain, const TrajectoryTask& task) {
  const Trajectory nominal = deterministic_trajectory(chain, task);
  for (std::size_t k = 0; k < task.steps(); ++k) {
    const double sv = min_singular_value(jacobian(nominal[k], chain));
    if (!(sv > kMinSingularValue)) {
      throw Error(ErrorKind::NearSingularTrajectory,
                  "nominal path reaches min singular value " + std::to_string(sv) + " at step " +
                      std::to_string(k));
    }
  }
}

Ensemble simulate_ensemble(const RngStream& seed, const ChainSpec& chain, const TrajectoryTask& task,
                           const GroundTruthLaw& law, std::size_t runs) {
  if (!(law.noise_gain >= 0.0)) throw Error(ErrorKind::DomainError, "noise gain must be >= 0");
  check_task(chain, task);
  Ensemble out;
  out.dt = task.dt;
  out.runs.resize(runs);
  parallel::for_each_index(runs, [&](std::size_t r) {
    RngStream rng = seed.derive(r);
    Trajectory traj;
    traj.reserve(task.steps() + 1);
    traj.push_back(task.q0);
    for (std::size_t k = 0; k < task.steps(); ++k) {
      const JointState& q = traj.back();
      const Vec qdot = linalg::solve(jacobian(q, chain), task.ee_velocities[k]);
      const double sd = law.mode == NoiseMode::VelocityScaled
                            ? law.noise_gain * qdot.norm() * task.dt
                            : law.noise_gain;
      Vec next = q + qdot * task.dt;
      for (Index i = 0; i < next.size(); ++i) next(i) += sd * rng.normal();
      traj.push_back(std::move(next));
    }
    out.runs[r] = std::move(traj);
  });
  return out;
}

Ensemble simulate_model_ensemble(const RngStream& seed, const ChainSpec& chain,
                                 const TrajectoryTask& task,
                                 const motion::RandomJacobianModel& model, std::size_t runs) {
  const auto jac = jacobian_fn(chain);
  Ensemble out;
  out.dt = task.dt;
  out.runs.resize(runs);
  parallel::for_each_index(runs, [&](std::size_t r) {
    RngStream rng = seed.derive(r);
    Trajectory traj;
    traj.reserve(task.steps() + 1);
    traj.push_back(task.q0);
    for (std::size_t k = 0; k < task.steps(); ++k) {
      traj.push_back(motion::propagate(rng, model, {traj.back(), task.ee_velocities[k], task.dt}, jac));
    }
    out.runs[r] = std::move(traj);
  });
  return out;
}

std::vector<Vec> ensemble_mean(const Ensemble& e) {
  std::vector<Vec> out;
  out.reserve(e.steps() + 1);
  for (std::size_t k = 0; k <= e.steps(); ++k) out.push_back(stats::mean_vector(e.at_step(k)));
  return out;
}

std::vector<Mat> ensemble_covariance(const Ensemble& e) {
  std::vector<Mat> out;
  out.reserve(e.steps() + 1);
  for (std::size_t k = 0; k <= e.steps(); ++k) out.push_back(stats::sample_covariance(e.at_step(k)));
  return out;
}

void write_ensemble_csv(std::ostream& out, const Ensemble& e) {
  const auto old_precision = out.precision(15);
  out << "run,k,t";
  const Index n = e.runs.empty() ? 0 : e.runs.front().front().size();
  for (Index j = 0; j < n; ++j) out << ",q" << (j + 1);
  out << '\n';
  for (std::size_t r = 0; r < e.runs.size(); ++r) {
    for (std::size_t k = 0; k < e.runs[r].size(); ++k) {
      out << r << ',' << k << ',' << static_cast<double>(k) * e.dt;
      for (Index j = 0; j < n; ++j) out << ',' << e.runs[r][k](j);
      out << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace rmtu::manipulator
