#include "rmtu/filter.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <limits>
#include <numbers>
#include <string>

#include "rmtu/parallel.hpp"
#include "rmtu/stats.hpp"

namespace rmtu::filter {

using linalg::Index;

namespace {

constexpr std::size_t kParticleBlock = 64;
constexpr std::uint64_t kResampleStream = std::uint64_t{1} << 40;

bool is_particle_failure(ErrorKind kind) {
  return kind == ErrorKind::SingularMatrix || kind == ErrorKind::SingularDraw ||
         kind == ErrorKind::NormBoundViolated;
}

void systematic_resample(RngStream& rng, std::vector<JointState>& states,
                         const std::vector<double>& weights) {
  const std::size_t n = states.size();
  const double step = 1.0 / static_cast<double>(n);
  double u = rng.uniform() * step;
  std::vector<JointState> next;
  next.reserve(n);
  double cumulative = weights[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    while (u > cumulative && i + 1 < n) cumulative += weights[++i];
    next.push_back(states[i]);
    u += step;
  }
  states = std::move(next);
}

}  // namespace

SensorModel SensorModel::drifting(std::size_t steps, Index joints, const DriftProfile& profile) {
  if (!(profile.base_std - std::abs(profile.std_amplitude) > 0.0)) {
    throw Error(ErrorKind::DomainError, "drifting sensor noise std must stay positive");
  }
  const double m = static_cast<double>(std::max<std::size_t>(steps, 1));
  SensorModel s;
  s.bias = [m, joints, b = profile.final_bias](std::size_t k) {
    return Vec(Vec::Constant(joints, b * static_cast<double>(k) / m));
  };
  s.noise_std = [m, joints, profile](std::size_t k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / m;
    return Vec(Vec::Constant(joints, profile.base_std + profile.std_amplitude * std::sin(phase)));
  };
  return s;
}

SensorModel SensorModel::with_constant_std(double std) const {
  if (!(std > 0.0)) throw Error(ErrorKind::DomainError, "noise std must be positive");
  SensorModel s = *this;
  s.noise_std = [std, b = bias](std::size_t k) { return Vec(Vec::Constant(b(k).size(), std)); };
  return s;
}

SensorModel SensorModel::constant(Vec bias, Vec noise_std) {
  if (bias.size() != noise_std.size()) {
    throw Error(ErrorKind::ShapeMismatch, "bias and noise std differ in length");
  }
  if (!(noise_std.minCoeff() > 0.0)) throw Error(ErrorKind::DomainError, "noise std must be positive");
  SensorModel s;
  s.bias = [bias](std::size_t) { return bias; };
  s.noise_std = [noise_std](std::size_t) { return noise_std; };
  return s;
}

Vec SensorModel::measure(RngStream& rng, const JointState& q, std::size_t k) const {
  const Vec sd = noise_std(k);
  Vec y = q + bias(k);
  for (Index i = 0; i < y.size(); ++i) y(i) += sd(i) * rng.normal();
  return y;
}

double SensorModel::log_likelihood(const Vec& y, const JointState& q, std::size_t k) const {
  const Vec sd = noise_std(k);
  const Vec z = ((y - q - bias(k)).array() / sd.array()).matrix();
  return -0.5 * z.squaredNorm() - sd.array().log().sum() -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

std::vector<Vec> simulate_observations(const RngStream& seed, const SensorModel& sensor,
                                       const manipulator::Trajectory& truth) {
  RngStream rng = seed;
  std::vector<Vec> out;
  out.reserve(truth.size());
  for (std::size_t k = 1; k < truth.size(); ++k) out.push_back(sensor.measure(rng, truth[k], k));
  return out;
}

double ParticleSet::ess() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s > 0.0 ? 1.0 / s : 0.0;
}

FilterReport sis_run(const RngStream& seed, const motion::RandomJacobianModel& model,
                     const SensorModel& sensor, const std::vector<Vec>& observations,
                     const manipulator::TrajectoryTask& task, const manipulator::ChainSpec& chain,
                     const manipulator::Trajectory& truth, const FilterOptions& opt) {
  const std::size_t steps = task.steps();
  if (observations.size() != steps) {
    throw Error(ErrorKind::ShapeMismatch, "need one observation per task step");
  }
  if (!truth.empty() && truth.size() != steps + 1) {
    throw Error(ErrorKind::ShapeMismatch, "truth trajectory must hold steps + 1 states");
  }
  if (opt.particles == 0) throw Error(ErrorKind::DomainError, "particle count must be >= 1");

  const std::size_t n = opt.particles;
  const auto jac = manipulator::jacobian_fn(chain);
  ParticleSet set;
  set.states.assign(n, task.q0);
  set.weights.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> loglik(n);
  const double log_floor = std::log(kLikelihoodFloor);
  const std::size_t blocks = (n + kParticleBlock - 1) / kParticleBlock;

  FilterReport rep;
  for (std::size_t k = 0; k < steps; ++k) {
    const RngStream step_seed = seed.derive(k);
    const motion::PropagationContext base{JointState(), task.ee_velocities[k], task.dt};
    parallel::for_each_index(blocks, [&](std::size_t b) {
      RngStream rng = step_seed.derive(b);
      const std::size_t end = std::min(n, (b + 1) * kParticleBlock);
      for (std::size_t i = b * kParticleBlock; i < end; ++i) {
        motion::PropagationContext ctx = base;
        ctx.q = set.states[i];
        try {
          set.states[i] = motion::propagate(rng, model, ctx, jac);
        } catch (const Error& e) {
          if (!is_particle_failure(e.kind())) throw;
          // The model cannot move this particle; it keeps its state and
          // receives the floor likelihood.
          loglik[i] = log_floor;
          continue;
        }
        loglik[i] = std::max(sensor.log_likelihood(observations[k], set.states[i], k + 1), log_floor);
      }
    });

    if (std::all_of(loglik.begin(), loglik.end(), [&](double l) { return l <= log_floor; })) {
      throw Error(ErrorKind::WeightCollapse,
                  "every particle likelihood underflowed at step " + std::to_string(k + 1));
    }
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      loglik[i] += std::log(set.weights[i]);
      max_lw = std::max(max_lw, loglik[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += set.weights[i] = std::exp(loglik[i] - max_lw);
    for (double& w : set.weights) w /= total;

    Vec mean = Vec::Zero(task.q0.size());
    for (std::size_t i = 0; i < n; ++i) mean += set.weights[i] * set.states[i];
    Mat cov = Mat::Zero(mean.size(), mean.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Vec d = set.states[i] - mean;
      cov += set.weights[i] * d * d.transpose();
    }
    rep.bound.push_back(cov.diagonal().cwiseMax(0.0).cwiseSqrt());
    if (!truth.empty()) rep.error.push_back(mean - truth[k + 1]);
    rep.mean.push_back(std::move(mean));
    rep.covariance.push_back(std::move(cov));

    if (opt.resample == ResamplePolicy::SystematicOnLowEss &&
        set.ess() < 0.5 * static_cast<double>(n)) {
      RngStream rng = step_seed.derive(kResampleStream);
      systematic_resample(rng, set.states, set.weights);
      set.weights.assign(n, 1.0 / static_cast<double>(n));
    }
    rep.ess.push_back(set.ess());
  }
  return rep;
}

void write_report_csv(std::ostream& out, const FilterReport& report, double dt) {
  const auto old_precision = out.precision(15);
  const Index n = report.steps() == 0 ? 0 : report.mean.front().size();
  out << "k,t";
  for (const char* col : {"mean", "std", "err", "bound"}) {
    for (Index j = 1; j <= n; ++j) out << ',' << col << j;
  }
  out << '\n';
  const bool has_error = report.error.size() == report.steps();
  for (std::size_t k = 0; k < report.steps(); ++k) {
    out << k + 1 << ',' << static_cast<double>(k + 1) * dt;
    for (Index j = 0; j < n; ++j) out << ',' << report.mean[k](j);
    for (Index j = 0; j < n; ++j) out << ',' << std::sqrt(std::max(report.covariance[k](j, j), 0.0));
    for (Index j = 0; j < n; ++j) {
      out << ',';
      if (has_error) out << report.error[k](j);
    }
    for (Index j = 0; j < n; ++j) out << ',' << report.bound[k](j);
    out << '\n';
  }
  out.precision(old_precision);
}

BoundMetrics bound_quality_metrics(const std::vector<FilterReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::InsufficientRuns, "need at least one report");
  const std::size_t steps = reports.front().steps();
  for (const auto& r : reports) {
    if (r.steps() != steps || r.error.size() != steps) {
      throw Error(ErrorKind::ShapeMismatch, "reports need errors and a common step count");
    }
  }
  BoundMetrics out;
  if (steps == 0) return out;
  const Index joints = reports.front().bound.front().size();
  const double runs = static_cast<double>(reports.size());

  std::size_t covered = 0, total = 0;
  double abs_err = 0.0;
  for (Index j = 0; j < joints; ++j) {
    std::vector<double> avg_bound(steps, 0.0), avg_err(steps, 0.0);
    for (const auto& r : reports) {
      for (std::size_t k = 0; k < steps; ++k) {
        const double e = std::abs(r.error[k](j));
        const double b = r.bound[k](j);
        avg_bound[k] += b / runs;
        avg_err[k] += e / runs;
        abs_err += e;
        covered += e <= b ? 1 : 0;
        ++total;
      }
    }
    out.bound_cov += stats::coeff_of_variation(avg_bound) / static_cast<double>(joints);
    out.bound_error_corr += stats::pearson(avg_bound, avg_err) / static_cast<double>(joints);
  }
  out.mean_abs_error = abs_err / static_cast<double>(total);
  out.coverage = static_cast<double>(covered) / static_cast<double>(total);
  return out;
}

std::vector<ExperimentOutcome> filter_experiment(
    const RngStream& seed, const manipulator::ChainSpec& chain,
    const manipulator::TrajectoryTask& task, const manipulator::GroundTruthLaw& law,
    const SensorModel& truth_sensor, const SensorModel& likelihood,
    const std::vector<motion::RandomJacobianModel>& models, std::size_t runs,
    const FilterOptions& opt) {
  const manipulator::Ensemble truth =
      manipulator::simulate_ensemble(seed.derive(0), chain, task, law, runs);
  std::vector<std::vector<Vec>> obs(runs);
  parallel::for_each_index(runs, [&](std::size_t r) {
    obs[r] = simulate_observations(seed.derive(1).derive(r), truth_sensor, truth.runs[r]);
  });

  std::vector<ExperimentOutcome> out;
  for (const auto& model : models) {
    ExperimentOutcome o;
    o.model = motion::model_name(model);
    o.reports.resize(runs);
    parallel::for_each_index(runs, [&](std::size_t r) {
      o.reports[r] = sis_run(seed.derive(2).derive(r), model, likelihood, obs[r], task, chain,
                             truth.runs[r], opt);
    });
    o.metrics = bound_quality_metrics(o.reports);
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace rmtu::filter
