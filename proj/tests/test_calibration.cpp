#include <doctest.h>

#include "helpers.hpp"
#include "rmtu/calibration.hpp"
#include "rmtu/randmat.hpp"
#include "rmtu/stats.hpp"

using namespace rmtu;
using namespace rmtu::calibration;
using testing::Mat;
using testing::Vec;

namespace {

manipulator::TrajectoryTask short_task(const manipulator::ChainSpec& chain, std::size_t steps = 40) {
  return manipulator::make_line_task(chain, (Vec(3) << 1.05, 0.73, 0.8).finished(),
                                     {0.03, -0.01, -0.2}, steps, 0.01);
}

// Synthetic ensemble whose per-step joint noise is N(0, cov).
manipulator::Ensemble correlated_ensemble(const manipulator::ChainSpec& chain,
                                          const manipulator::TrajectoryTask& task, const Mat& cov,
                                          std::size_t runs, std::uint64_t seed) {
  const Mat l = cov.llt().matrixL();
  manipulator::Ensemble e;
  e.dt = task.dt;
  for (std::size_t r = 0; r < runs; ++r) {
    RngStream rng(seed, r);
    manipulator::Trajectory traj{task.q0};
    for (std::size_t k = 0; k < task.steps(); ++k) {
      const Vec& q = traj.back();
      const Vec z = (Vec(3) << rng.normal(), rng.normal(), rng.normal()).finished();
      traj.push_back(q + linalg::solve(manipulator::jacobian(q, chain), task.ee_velocities[k]) * task.dt + l * z);
    }
    e.runs.push_back(std::move(traj));
  }
  return e;
}

struct BProblem {
  Mat mean_J;
  Vec ee_vel;
  double dt = 1.0;
};

BProblem b_problem(RngStream& rng) {
  BProblem p;
  p.mean_J = testing::random_matrix(rng, 3, 3) + 3.0 * Mat::Identity(3, 3);
  p.ee_vel = (Vec(3) << 1.0, -0.5, 0.8).finished();
  return p;
}

// Residual that B* would leave: measurement minus nominal prediction.
Vec synthesize_omega(const BProblem& p, const Mat& b_star) {
  const auto f = linalg::lu_decompose(p.mean_J);
  const Vec v = p.ee_vel * p.dt;
  return linalg::inverse(f.right) * linalg::inverse(b_star) * linalg::inverse(f.left) * v -
         linalg::solve(p.mean_J, v);
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("noiseless ensembles leave no process noise") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain);
  const auto e = manipulator::simulate_ensemble(RngStream(1, 0), chain, task, {0.0, manipulator::NoiseMode::VelocityScaled}, 3);
  const auto noise = extract_process_noise(e, task, chain);
  REQUIRE(noise.runs() == 3);
  REQUIRE(noise.steps() == task.steps());
  double worst = 0.0;
  for (const auto& run : noise.omegas) {
    for (const auto& w : run) worst = std::max(worst, w.cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("a single run yields one residual per step") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain, 10);
  const auto e = manipulator::simulate_ensemble(RngStream(2, 0), chain, task, {0.3, manipulator::NoiseMode::VelocityScaled}, 1);
  const auto noise = extract_process_noise(e, task, chain);
  CHECK(noise.runs() == 1);
  CHECK(noise.omegas.front().size() == 10);
  CHECK(noise.mean_jacobians.front().size() == 10);
  try {
    estimate_sigma_omega(noise);
    FAIL("expected InsufficientRuns");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::InsufficientRuns);
  }
}

TEST_CASE("residual spread matches the injected velocity-scaled law") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = manipulator::reference_task(chain);
  const double c = 0.3;
  const auto e = manipulator::simulate_ensemble(RngStream(3, 0), chain, task, {c, manipulator::NoiseMode::VelocityScaled}, 400);
  const auto noise = extract_process_noise(e, task, chain);
  double worst = 0.0;
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    std::vector<Vec> w;
    double law_var = 0.0;
    for (std::size_t i = 0; i < noise.runs(); ++i) {
      w.push_back(noise.omegas[i][k]);
      const double sd = c * linalg::solve(noise.mean_jacobians[i][k], task.ee_velocities[k]).norm() * task.dt;
      law_var += sd * sd;
    }
    const double law_sd = std::sqrt(law_var / static_cast<double>(noise.runs()));
    const double sample_sd = std::sqrt(stats::sample_covariance(w).trace() / 3.0);
    worst = std::max(worst, std::abs(sample_sd / law_sd - 1.0));
  }
  CHECK(worst < 0.10);
}

TEST_CASE("Sigma_omega recovers a constant noise covariance") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = manipulator::reference_task(chain);
  const double c = 0.002;
  const auto e = manipulator::simulate_ensemble(RngStream(4, 0), chain, task, {c, manipulator::NoiseMode::Constant}, 200);
  const Mat est = estimate_sigma_omega(extract_process_noise(e, task, chain)).matrix();
  CHECK(testing::rel_frobenius(est, c * c * Mat::Identity(3, 3)) < 0.05);
}

TEST_CASE("Sigma_omega keeps a dominant third joint") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = manipulator::reference_task(chain);
  const Mat law = Vec((Vec(3) << 0.0330e-3, 0.0547e-3, 0.2457e-3).finished()).asDiagonal();
  const auto e = correlated_ensemble(chain, task, law, 100, 5);
  const Mat est = estimate_sigma_omega(extract_process_noise(e, task, chain)).matrix();
  Eigen::Index top = 0;
  est.diagonal().maxCoeff(&top);
  CHECK(top == 2);
  CHECK(est(0, 0) < est(1, 1));
  CHECK(testing::rel_frobenius(est, law) < 0.05);
}

TEST_CASE("recover_B returns the identity without residual") {
  RngStream rng(6, 0);
  const auto p = b_problem(rng);
  const Mat b = recover_B(Vec::Zero(3), p.mean_J, p.ee_vel, p.dt, {}).matrix();
  CHECK((b - Mat::Identity(3, 3)).norm() < 1e-8);
}

TEST_CASE("recover_B with a pure regularizer ignores the residual") {
  RngStream rng(7, 0);
  const auto p = b_problem(rng);
  CalibrationWeights w{0.0, 1.0, 0.5, 0.5};
  const Vec omega = (Vec(3) << 0.3, -0.2, 0.5).finished();
  CHECK((recover_B(omega, p.mean_J, p.ee_vel, p.dt, w).matrix() - Mat::Identity(3, 3)).norm() < 1e-8);
}

TEST_CASE("recover_B does at least as well as the generating matrix") {
  RngStream rng(8, 0);
  const randmat::WishartParams law(64.0, linalg::SpdMat(Mat::Identity(3, 3) / 64.0));
  for (int t = 0; t < 20; ++t) {
    const auto p = b_problem(rng);
    const Mat b_star = randmat::wishart_sample(rng, law).matrix();
    const Vec omega = synthesize_omega(p, b_star);
    const CalibrationWeights w;
    const Mat b = recover_B(omega, p.mean_J, p.ee_vel, p.dt, w).matrix();
    CHECK(b.llt().info() == Eigen::Success);
    const double f_rec = recover_objective(linalg::inverse(b), omega, p.mean_J, p.ee_vel, p.dt, w);
    const double f_star = recover_objective(linalg::inverse(b_star), omega, p.mean_J, p.ee_vel, p.dt, w);
    CHECK(f_rec <= f_star + 1e-8);
  }
}

TEST_CASE("recover_B approaches the generating matrix as the regularizer vanishes") {
  RngStream rng(9, 0);
  const auto p = b_problem(rng);
  Mat b_star = Mat::Identity(3, 3);
  b_star(0, 0) = 1.2;
  b_star(2, 2) = 0.85;
  const Vec omega = synthesize_omega(p, b_star);
  const CalibrationWeights strong{0.5, 0.5, 0.5, 0.5}, weak{0.999, 0.001, 0.5, 0.5};
  const Mat x_star = linalg::inverse(b_star);
  auto fit_err = [&](const CalibrationWeights& w) {
    const Mat x = linalg::inverse(recover_B(omega, p.mean_J, p.ee_vel, p.dt, w).matrix());
    return recover_objective(x, omega, p.mean_J, p.ee_vel, p.dt, {1.0, 0.0, 0.5, 0.5});
  };
  // The residual fit improves as alpha2 shrinks; the fit term is exact at B*.
  CHECK(fit_err(weak) <= fit_err(strong));
  CHECK(fit_err(weak) < 1e-3 * recover_objective(Mat::Identity(3, 3), omega, p.mean_J, p.ee_vel, p.dt, {1.0, 0.0, 0.5, 0.5}));
  CHECK(recover_objective(x_star, omega, p.mean_J, p.ee_vel, p.dt, {1.0, 0.0, 0.5, 0.5}) < 1e-12);
}

TEST_CASE("recover_B result survives a random perturbation descent check") {
  RngStream rng(10, 0);
  const CalibrationWeights w;
  for (int t = 0; t < 10; ++t) {
    const auto p = b_problem(rng);
    const Vec omega = 0.2 * (Vec(3) << rng.normal(), rng.normal(), rng.normal()).finished();
    const Mat x = linalg::inverse(recover_B(omega, p.mean_J, p.ee_vel, p.dt, w).matrix());
    const double f0 = recover_objective(x, omega, p.mean_J, p.ee_vel, p.dt, w);
    double best_gain = 0.0;
    for (int s = 0; s < 200; ++s) {
      const Mat g = testing::random_matrix(rng, 3, 3);
      const Mat e = 0.5 * (g + g.transpose());
      const Mat xp = x + 1e-4 * e / e.norm();
      if (Eigen::SelfAdjointEigenSolver<Mat>(xp).eigenvalues().minCoeff() <= 0.0) continue;
      best_gain = std::max(best_gain, f0 - recover_objective(xp, omega, p.mean_J, p.ee_vel, p.dt, w));
    }
    CHECK(best_gain <= 1e-8);
  }
}

TEST_CASE("dispersion of identical identities is zero") {
  const std::vector<linalg::SpdMat> id(4, linalg::SpdMat::identity(3));
  CHECK(dispersion_at_step(id) == 0.0);
  CHECK(estimate_dispersion({id, id}) == 0.0);
  try {
    dispersion_at_step(std::vector<linalg::SpdMat>{linalg::SpdMat::identity(3)});
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientSamples);
  }
}

TEST_CASE("one deviant sample among identities") {
  std::vector<linalg::SpdMat> s(3, linalg::SpdMat::identity(3));
  s.emplace_back(2.0 * Mat::Identity(3, 3));
  // ||2I - I||_F^2 = 3 once in four samples, over ||I||_F^2 = 3: sqrt(1/4).
  CHECK(dispersion_at_step(s) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("dispersion round trip through the Wishart sampler") {
  const motion::MaxEntWishartModel model(0.25, 3);
  RngStream rng(11, 0);
  std::vector<linalg::SpdMat> draws;
  for (int i = 0; i < 10000; ++i) draws.push_back(randmat::wishart_sample(rng, model.perturbation_law()));
  CHECK(dispersion_at_step(draws) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("dispersion is scale consistent for small symmetric perturbations") {
  const Mat e = (Mat(3, 3) << 1, 0.5, 0, 0.5, -1, 0.2, 0, 0.2, 0.3).finished();
  for (double eps : {1e-2, 1e-4}) {
    const std::vector<linalg::SpdMat> s{linalg::SpdMat(Mat::Identity(3, 3) + eps * e),
                                        linalg::SpdMat(Mat::Identity(3, 3) - eps * e)};
    CHECK(dispersion_at_step(s) == doctest::Approx(eps * e.norm() / std::sqrt(3.0)).epsilon(1e-12));
  }
}

TEST_CASE("weights must be convex pairs") {
  CHECK_NOTHROW(CalibrationWeights{}.validate());
  CHECK_THROWS_AS((CalibrationWeights{0.7, 0.7, 0.5, 0.5}.validate()), Error);
  CHECK_THROWS_AS((CalibrationWeights{0.5, 0.5, -0.1, 1.1}.validate()), Error);
}

TEST_CASE("Gaussian fit on a noiseless ensemble settles at the alpha floor") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain);
  const auto data = manipulator::simulate_ensemble(RngStream(12, 0), chain, task, {0.0, manipulator::NoiseMode::VelocityScaled}, 4);
  GaussianFitOptions opt;
  opt.inner_runs = 20;
  opt.refine_iterations = 8;
  const double jmax = max_target_norm(chain, task, opt.target);
  const auto fit = fit_gaussian_params(data, task, chain, {}, jmax, opt);
  CHECK(fit.alpha == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(fit.u == doctest::Approx(jmax + fit.u_tilde));
}

TEST_CASE("Gaussian fit is self-consistent and reproducible") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain);
  GaussianFitOptions opt;
  opt.inner_runs = 60;
  opt.refine_iterations = 10;
  const double jmax = max_target_norm(chain, task, opt.target);
  const double u_star = jmax + 2.0, alpha_star = 0.1;
  const motion::GaussianNoiseMatrixModel truth(u_star, alpha_star, opt.target);
  const auto data = manipulator::simulate_model_ensemble(RngStream(13, 0), chain, task, truth, 200);
  const CalibrationWeights w;
  const auto fit = fit_gaussian_params(data, task, chain, w, jmax, opt);
  const double f_star = gaussian_fit_objective(data, task, chain, w, u_star, alpha_star, opt);
  CHECK(fit.objective <= 1.05 * f_star);
  CHECK(fit.objective == doctest::Approx(gaussian_fit_objective(data, task, chain, w, fit.u, fit.alpha, opt)));
  const auto again = fit_gaussian_params(data, task, chain, w, jmax, opt);
  CHECK(again.u == fit.u);
  CHECK(again.alpha == fit.alpha);
}

TEST_CASE("fitted norm bound on the reference task lies between 10 and 30") {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = manipulator::reference_task(chain);
  const auto data = manipulator::simulate_ensemble(RngStream(14, 0), chain, task, {0.3, manipulator::NoiseMode::VelocityScaled}, 60);
  GaussianFitOptions opt;
  opt.inner_runs = 40;
  opt.refine_iterations = 10;
  const auto fit = fit_gaussian_params(data, task, chain, {}, max_target_norm(chain, task, opt.target), opt);
  CHECK(fit.u >= 10.0);
  CHECK(fit.u <= 30.0);
  CHECK(fit.alpha > 0.0);
  CHECK(fit.alpha <= 1.0);
}

}  // TEST_SUITE
