#include "rmtu/calibration.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <glog/logging.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "rmtu/parallel.hpp"
#include "rmtu/stats.hpp"

namespace rmtu::calibration {

using linalg::Index;
using manipulator::Ensemble;
using manipulator::TrajectoryTask;

void CalibrationWeights::validate() const {
  auto pair_ok = [](double a, double b) {
    return a >= 0.0 && b >= 0.0 && std::abs(a + b - 1.0) <= 1e-12;
  };
  if (!pair_ok(alpha1, alpha2)) {
    throw Error(ErrorKind::DomainError, "alpha1 and alpha2 must be >= 0 and sum to 1");
  }
  if (!pair_ok(beta1, beta2)) {
    throw Error(ErrorKind::DomainError, "beta1 and beta2 must be >= 0 and sum to 1");
  }
}

NoiseEnsemble extract_process_noise(const Ensemble& ensemble, const TrajectoryTask& task,
                                    const manipulator::ChainSpec& chain) {
  if (ensemble.steps() != task.steps()) {
    throw Error(ErrorKind::ShapeMismatch, "ensemble and task have different step counts");
  }
  NoiseEnsemble out;
  out.omegas.resize(ensemble.runs.size());
  out.mean_jacobians.resize(ensemble.runs.size());
  parallel::for_each_index(ensemble.runs.size(), [&](std::size_t i) {
    const auto& run = ensemble.runs[i];
    auto& om = out.omegas[i];
    auto& jm = out.mean_jacobians[i];
    om.reserve(task.steps());
    jm.reserve(task.steps());
    for (std::size_t k = 0; k < task.steps(); ++k) {
      Mat j = manipulator::jacobian(run[k], chain);
      om.push_back(run[k] + linalg::solve(j, task.ee_velocities[k]) * task.dt - run[k + 1]);
      jm.push_back(std::move(j));
    }
  });
  return out;
}

SpdMat estimate_sigma_omega(const NoiseEnsemble& noise) {
  if (noise.runs() < 2) {
    throw Error(ErrorKind::InsufficientRuns, "need at least 2 runs, got " +
                                                 std::to_string(noise.runs()));
  }
  const Index n = noise.omegas.front().front().size();
  Mat acc = Mat::Zero(n, n);
  std::vector<Vec> column(noise.runs());
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    for (std::size_t i = 0; i < noise.runs(); ++i) column[i] = noise.omegas[i][k];
    acc += stats::sample_covariance(column);
  }
  acc /= static_cast<double>(noise.steps());
  try {
    return SpdMat(acc);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
  }
  return SpdMat(acc + 1e-15 * Mat::Identity(n, n));
}

namespace {

// The data term is omega - P (X - I) a with P = J2^-1 and a = J1^-1 v, so
// it is affine in D = X - I.
struct RecoverProblem {
  Mat P;
  Vec a;
  Vec omega;
  double alpha1;
  double alpha2;

  RecoverProblem(const Vec& om, const Mat& mean_J, const Vec& ee_vel, double dt,
                 const CalibrationWeights& w)
      : omega(om), alpha1(w.alpha1), alpha2(w.alpha2) {
    if (mean_J.rows() != mean_J.cols() || om.size() != mean_J.rows() ||
        ee_vel.size() != mean_J.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "recover_B needs a square Jacobian and matching vectors");
    }
    const auto split = linalg::lu_decompose(mean_J);
    P = linalg::inverse(split.right);
    a = linalg::solve(split.left, ee_vel * dt);
  }

  Index n() const { return P.rows(); }

  double value(const Mat& d) const {
    return alpha1 * (omega - P * d * a).norm() + alpha2 * d.norm();
  }
};

// Symmetric D <-> p in R^{n(n+1)/2}. Off-diagonal coordinates carry a
// sqrt(2) so that ||p|| = ||D||_F.
Mat sym_from_params(const Vec& p, Index n) {
  Mat d(n, n);
  Index idx = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i, ++idx) {
      if (i == j) {
        d(i, i) = p(idx);
      } else {
        d(i, j) = d(j, i) = p(idx) / std::sqrt(2.0);
      }
    }
  }
  return d;
}

bool is_pd(const Mat& x, double margin) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > margin;
}

// The optimum of alpha1 ||omega - A p|| + alpha2 ||p|| satisfies the KKT
// relation p = A^T (A A^T + lambda I)^-1 omega for some lambda >= 0, so a
// one-dimensional search along that path finds it.
Mat solve_on_ridge_path(const RecoverProblem& pr) {
  const Index n = pr.n();
  const Index m = n * (n + 1) / 2;
  Mat A(n, m);
  for (Index c = 0; c < m; ++c) A.col(c) = pr.P * sym_from_params(Vec::Unit(m, c), n) * pr.a;

  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec s = svd.singularValues();
  const Vec uw = svd.matrixU().transpose() * pr.omega;
  const double smax = s.size() ? s(0) : 0.0;
  if (!(smax > 0.0)) return Mat::Zero(n, n);
  const double rank_tol = smax * 1e-13;

  auto p_at = [&](double lambda) {
    Vec coeff(s.size());
    for (Index i = 0; i < s.size(); ++i) {
      coeff(i) = s(i) > rank_tol ? s(i) * uw(i) / (s(i) * s(i) + lambda) : 0.0;
    }
    return Vec(svd.matrixV() * coeff);
  };
  auto f_at = [&](double log_lambda) {
    const double lambda = std::exp(log_lambda);
    const Vec p = p_at(lambda);
    return pr.alpha1 * (pr.omega - A * p).norm() + pr.alpha2 * p.norm();
  };

  // Dense grid in log lambda, then golden section around the best node.
  const double lo = std::log(smax * smax) - 30.0;
  const double hi = std::log(smax * smax) + 30.0;
  constexpr int kGrid = 241;
  int best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  for (int g = 0; g < kGrid; ++g) {
    const double fv = f_at(lo + (hi - lo) * g / (kGrid - 1));
    if (fv < best_f) {
      best_f = fv;
      best = g;
    }
  }
  const double step = (hi - lo) / (kGrid - 1);
  double a = lo + step * std::max(best - 1, 0);
  double b = lo + step * std::min(best + 1, kGrid - 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f_at(x1), f2 = f_at(x2);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f_at(x2);
    }
  }

  // Endpoints of the path: exact minimum-norm fit and D = 0.
  Vec best_p = p_at(std::exp(0.5 * (a + b)));
  double best_val = pr.alpha1 * (pr.omega - A * best_p).norm() + pr.alpha2 * best_p.norm();
  const Vec exact = p_at(0.0);
  const double exact_val = pr.alpha1 * (pr.omega - A * exact).norm() + pr.alpha2 * exact.norm();
  if (exact_val < best_val) {
    best_p = exact;
    best_val = exact_val;
  }
  if (pr.alpha1 * pr.omega.norm() <= best_val) return Mat::Zero(n, n);
  return sym_from_params(best_p, n);
}

// Smoothed objective in the Cholesky coordinates X = L L^T with
// L_ii = exp(l_ii). Used when the path optimum leaves the SPD cone.
class CholeskyObjective final : public ceres::FirstOrderFunction {
 public:
  CholeskyObjective(const RecoverProblem& pr, double eps_fit, double eps_reg)
      : pr_(pr), eps_fit_(eps_fit), eps_reg_(eps_reg) {}

  int NumParameters() const override {
    const auto n = static_cast<int>(pr_.n());
    return n * (n + 1) / 2;
  }

  static Mat lower_from(const double* x, Index n) {
    Mat l = Mat::Zero(n, n);
    Index idx = 0;
    for (Index j = 0; j < n; ++j) {
      for (Index i = j; i < n; ++i, ++idx) l(i, j) = i == j ? std::exp(x[idx]) : x[idx];
    }
    return l;
  }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const Index n = pr_.n();
    const Mat l = lower_from(x, n);
    const Mat d = l * l.transpose() - Mat::Identity(n, n);
    const Vec r = pr_.omega - pr_.P * d * pr_.a;
    const double rn = std::sqrt(r.squaredNorm() + eps_fit_ * eps_fit_);
    const double dn = std::sqrt(d.squaredNorm() + eps_reg_ * eps_reg_);
    *cost = pr_.alpha1 * rn + pr_.alpha2 * dn;
    if (!std::isfinite(*cost)) return false;
    if (gradient != nullptr) {
      const Mat g = -pr_.alpha1 / rn * (pr_.P.transpose() * r) * pr_.a.transpose() +
                    pr_.alpha2 / dn * d;
      const Mat gl = (g + g.transpose()) * l;
      Index idx = 0;
      for (Index j = 0; j < n; ++j) {
        for (Index i = j; i < n; ++i, ++idx) gradient[idx] = i == j ? gl(i, i) * l(i, i) : gl(i, j);
      }
    }
    return true;
  }

 private:
  const RecoverProblem& pr_;
  double eps_fit_;
  double eps_reg_;
};

Mat solve_cholesky_bfgs(const RecoverProblem& pr) {
  const Index n = pr.n();
  std::vector<double> x(static_cast<std::size_t>(n * (n + 1) / 2), 0.0);
  const double fit_scale = std::max(pr.omega.norm(), 1e-300);
  FLAGS_minloglevel = google::GLOG_ERROR;
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.logging_type = ceres::SILENT;
  options.max_num_iterations = 500;
  options.function_tolerance = 1e-15;
  options.gradient_tolerance = 1e-16;
  options.parameter_tolerance = 1e-15;
  for (double eps = 1e-2; eps >= 1e-12; eps *= 1e-2) {
    ceres::GradientProblem problem(new CholeskyObjective(pr, eps * fit_scale, eps));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, x.data(), &summary);
  }
  const Mat l = CholeskyObjective::lower_from(x.data(), n);
  return l * l.transpose() - Mat::Identity(n, n);
}

// Coordinate pattern search on the exact objective, keeping I + D positive
// definite. Removes the residual error of the smoothed solve.
Mat polish(const RecoverProblem& pr, Mat d) {
  const Index n = pr.n();
  const Index m = n * (n + 1) / 2;
  const Mat eye = Mat::Identity(n, n);
  double fd = pr.value(d);
  auto try_move = [&](const Mat& dir, double h) {
    const Mat trial = d + h * dir;
    const double ft = pr.value(trial);
    if (ft < fd && is_pd(eye + trial, 0.0)) {
      d = trial;
      fd = ft;
      return true;
    }
    return false;
  };
  double h = 1e-3;
  for (int sweep = 0; sweep < 2000 && h > 1e-13; ++sweep) {
    bool improved = false;
    for (Index c = 0; c < m; ++c) {
      const Mat dir = sym_from_params(Vec::Unit(m, c), n);
      for (double sign : {1.0, -1.0}) {
        // Keep doubling along a direction while it pays off.
        double step = h;
        while (try_move(sign * dir, step)) {
          improved = true;
          step *= 2.0;
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  return d;
}

}  // namespace

double recover_objective(const Mat& b_inverse, const Vec& omega, const Mat& mean_J,
                         const Vec& ee_vel, double dt, const CalibrationWeights& w) {
  const RecoverProblem pr(omega, mean_J, ee_vel, dt, w);
  return pr.value(b_inverse - Mat::Identity(pr.n(), pr.n()));
}

SpdMat recover_B(const Vec& omega, const Mat& mean_J, const Vec& ee_vel, double dt,
                 const CalibrationWeights& w) {
  w.validate();
  const RecoverProblem pr(omega, mean_J, ee_vel, dt, w);
  const Index n = pr.n();
  const Mat eye = Mat::Identity(n, n);
  if (w.alpha1 == 0.0 || omega.norm() == 0.0) return SpdMat::identity(n);

  Mat d = solve_on_ridge_path(pr);
  if (!is_pd(eye + d, 1e-9)) {
    d = solve_cholesky_bfgs(pr);
    d = polish(pr, d);
  }
  if (pr.value(Mat::Zero(n, n)) <= pr.value(d)) return SpdMat::identity(n);
  // The constrained optimum may sit on the boundary of the cone; keep B finite.
  Eigen::SelfAdjointEigenSolver<Mat> es(eye + d);
  const Vec lam = es.eigenvalues().cwiseMax(kMinInverseEigenvalue);
  return SpdMat(es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose());
}

double dispersion_at_step(std::span<const SpdMat> samples) {
  if (samples.size() < 2) {
    throw Error(ErrorKind::InsufficientSamples,
                "dispersion needs at least 2 samples per step, got " + std::to_string(samples.size()));
  }
  const Index n = samples.front().dim();
  const Mat eye = Mat::Identity(n, n);
  double acc = 0.0;
  for (const auto& b : samples) acc += (b.matrix() - eye).squaredNorm();
  return std::sqrt(acc / static_cast<double>(samples.size()) / static_cast<double>(n));
}

double estimate_dispersion(const std::vector<std::vector<SpdMat>>& per_step) {
  if (per_step.empty()) throw Error(ErrorKind::InsufficientSamples, "no steps to average");
  double acc = 0.0;
  for (const auto& step : per_step) acc += dispersion_at_step(step);
  return acc / static_cast<double>(per_step.size());
}

double max_target_norm(const manipulator::ChainSpec& chain, const TrajectoryTask& task,
                       motion::NoiseTarget target) {
  double best = 0.0;
  for (const auto& q : manipulator::deterministic_trajectory(chain, task)) {
    const Mat j = manipulator::jacobian(q, chain);
    const double v = target == motion::NoiseTarget::Jacobian ? linalg::frobenius_norm(j)
                                                             : linalg::frobenius_norm(linalg::inverse(j));
    best = std::max(best, v);
  }
  return best;
}

namespace {

struct Moments {
  std::vector<Vec> mean;
  std::vector<double> trace_cov;
};

Moments moments_of(const Ensemble& e) {
  Moments m;
  for (std::size_t k = 1; k <= e.steps(); ++k) {
    const auto states = e.at_step(k);
    m.mean.push_back(stats::mean_vector(states));
    m.trace_cov.push_back(stats::sample_covariance(states).trace());
  }
  return m;
}

double objective_against(const Moments& data, const TrajectoryTask& task,
                         const manipulator::ChainSpec& chain, const CalibrationWeights& w, double u,
                         double alpha, const GaussianFitOptions& opt) {
  const motion::RandomJacobianModel model = motion::GaussianNoiseMatrixModel(u, alpha, opt.target);
  Ensemble sim;
  try {
    sim = manipulator::simulate_model_ensemble(RngStream(opt.inner_seed, 0), chain, task, model,
                                               opt.inner_runs);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  const Moments mm = moments_of(sim);
  double acc = 0.0;
  for (std::size_t k = 0; k < mm.mean.size(); ++k) {
    acc += w.beta1 * (mm.mean[k] - data.mean[k]).norm() +
           w.beta2 * std::abs(mm.trace_cov[k] - data.trace_cov[k]);
  }
  return acc / static_cast<double>(mm.mean.size());
}

}  // namespace

double gaussian_fit_objective(const Ensemble& data, const TrajectoryTask& task,
                              const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                              double u, double alpha, const GaussianFitOptions& opt) {
  w.validate();
  return objective_against(moments_of(data), task, chain, w, u, alpha, opt);
}

GaussianFit fit_gaussian_params(const Ensemble& data, const TrajectoryTask& task,
                                const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                                double jac_norm_max, const GaussianFitOptions& opt) {
  w.validate();
  if (opt.u_tilde_grid.empty() || opt.alpha_grid.empty()) {
    throw Error(ErrorKind::ConfigError, "fit grids must not be empty");
  }
  if (data.steps() != task.steps()) {
    throw Error(ErrorKind::ShapeMismatch, "ensemble and task have different step counts");
  }
  const Moments dm = moments_of(data);
  auto eval = [&](double log_ut, double log_alpha) {
    return objective_against(dm, task, chain, w, jac_norm_max + std::exp(log_ut),
                             std::exp(log_alpha), opt);
  };

  const auto [ut_lo, ut_hi] = std::minmax_element(opt.u_tilde_grid.begin(), opt.u_tilde_grid.end());
  const auto [al_lo, al_hi] = std::minmax_element(opt.alpha_grid.begin(), opt.alpha_grid.end());
  const std::array<double, 2> lo{std::log(*ut_lo), std::log(*al_lo)};
  const std::array<double, 2> hi{std::log(*ut_hi), std::log(std::min(*al_hi, 1.0))};

  const std::size_t nu = opt.u_tilde_grid.size();
  std::vector<double> grid_f(nu * opt.alpha_grid.size());
  parallel::for_each_index(grid_f.size(), [&](std::size_t g) {
    grid_f[g] = eval(std::log(opt.u_tilde_grid[g % nu]), std::log(opt.alpha_grid[g / nu]));
  });
  const auto best_g = static_cast<std::size_t>(
      std::min_element(grid_f.begin(), grid_f.end()) - grid_f.begin());
  std::array<double, 2> x{std::log(opt.u_tilde_grid[best_g % nu]),
                          std::log(opt.alpha_grid[best_g / nu])};
  double fx = grid_f[best_g];

  std::array<double, 2> step{std::log(2.0), std::log(2.0)};
  for (std::size_t it = 0; it < opt.refine_iterations; ++it) {
    std::array<std::array<double, 2>, 4> trial;
    for (int t = 0; t < 4; ++t) {
      trial[t] = x;
      const int axis = t / 2;
      trial[t][axis] = std::clamp(x[axis] + (t % 2 ? -step[axis] : step[axis]), lo[axis], hi[axis]);
    }
    std::array<double, 4> ft;
    parallel::for_each_index(4, [&](std::size_t t) { ft[t] = eval(trial[t][0], trial[t][1]); });
    const auto bt = static_cast<std::size_t>(std::min_element(ft.begin(), ft.end()) - ft.begin());
    if (ft[bt] < fx) {
      fx = ft[bt];
      x = trial[bt];
    } else {
      step[0] *= 0.5;
      step[1] *= 0.5;
    }
  }

  GaussianFit fit;
  fit.u_tilde = std::exp(x[0]);
  fit.alpha = std::exp(x[1]);
  fit.u = jac_norm_max + fit.u_tilde;
  fit.objective = fx;
  return fit;
}

CalibrationResult calibrate(const Ensemble& data, const TrajectoryTask& task,
                            const manipulator::ChainSpec& chain, const CalibrationWeights& w,
                            const CalibrateOptions& opt) {
  w.validate();
  CalibrationResult res;
  res.weights = w;
  const NoiseEnsemble noise = extract_process_noise(data, task, chain);
  res.sigma_omega = estimate_sigma_omega(noise);

  // omega is prediction minus measurement; the random-Jacobian model explains
  // measurement minus prediction, so the B fit sees -omega.
  std::vector<std::vector<SpdMat>> per_step(noise.steps());
  parallel::for_each_index(noise.steps(), [&](std::size_t k) {
    auto& bs = per_step[k];
    bs.reserve(noise.runs());
    for (std::size_t i = 0; i < noise.runs(); ++i) {
      const Mat& j = noise.mean_jacobians[i][k];
      double scale = 1.0;
      if (opt.relative_residuals) {
        const double step = (linalg::solve(j, task.ee_velocities[k]) * task.dt).norm();
        if (step > 0.0) scale = 1.0 / step;
      }
      bs.push_back(recover_B(-noise.omegas[i][k] * scale, j, task.ee_velocities[k] * scale,
                             task.dt, w));
    }
  });
  res.sigma_B_per_step.reserve(per_step.size());
  for (const auto& bs : per_step) res.sigma_B_per_step.push_back(dispersion_at_step(bs));
  res.sigma_B = estimate_dispersion(per_step);

  res.gaussian = fit_gaussian_params(data, task, chain, w,
                                     max_target_norm(chain, task, opt.gaussian.target), opt.gaussian);
  return res;
}

}  // namespace rmtu::calibration
