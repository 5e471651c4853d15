#include <cmath>
#include <sstream>

#include "commands.hpp"
#include "rmtu/filter.hpp"
#include "rmtu/parallel.hpp"
#include "rmtu/randmat.hpp"
#include "rmtu/wrench.hpp"

namespace rmtu::cli {

namespace {

using linalg::Mat;
using linalg::Vec;

Json check(const std::string& name, bool passed, double value) {
  std::ostringstream detail;
  detail.precision(6);
  detail << value;
  return {{"name", name}, {"passed", passed}, {"detail", detail.str()}};
}

Mat random_matrix(RngStream& rng, int r, int c) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Json wishart_dof() {
  const double theta = motion::maxent_theta(0.25, linalg::SpdMat::identity(3));
  return check("maxent theta for dispersion 0.25", std::abs(theta - 60.0) < 1e-9, theta);
}

Json gaussian_budget() {
  const motion::GaussianNoiseMatrixModel model(18.0, 0.1, motion::NoiseTarget::Jacobian);
  Mat mean = Mat::Zero(3, 3);
  mean(0, 0) = 2.0;
  const Mat s = motion::gaussian_noise_covariance(model, mean).matrix();
  const double err = (s - Mat::Identity(3, 3) * (3.2 / 9.0)).norm();
  return check("entropy-maximizing noise covariance", err < 1e-12, err);
}

Json lu_roundtrip() {
  RngStream rng(101, 0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Mat a = random_matrix(rng, 3, 3);
    const auto f = linalg::lu_decompose(a);
    worst = std::max(worst, (f.left * f.right - a).norm() / a.norm());
  }
  return check("LU split reproduces the matrix", worst < 1e-12, worst);
}

Json wishart_mean() {
  const randmat::WishartParams p(64.0, linalg::SpdMat(Mat::Identity(3, 3) / 64.0));
  RngStream rng(102, 0);
  Mat sum = Mat::Zero(3, 3);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) sum += randmat::wishart_sample(rng, p).matrix();
  const double err = (sum / draws - Mat::Identity(3, 3)).norm() / std::sqrt(3.0);
  return check("Wishart sample mean", err < 0.03, err);
}

Json matnorm_density() {
  RngStream rng(103, 0);
  const Mat a = random_matrix(rng, 2, 2);
  const Mat b = random_matrix(rng, 3, 3);
  const linalg::SpdMat row(a * a.transpose() + Mat::Identity(2, 2));
  const linalg::SpdMat col(b * b.transpose() + Mat::Identity(3, 3));
  const randmat::MatrixNormalParams p(random_matrix(rng, 2, 3), row, col);
  const Mat x = random_matrix(rng, 2, 3);
  const Mat xt = x.transpose();
  const Mat mt = p.mean.transpose();
  const double direct = randmat::matnorm_logpdf(x, p);
  const double dense = randmat::mvn_logpdf(linalg::vec(xt), linalg::vec(mt),
                                           linalg::SpdMat(linalg::kron(row.matrix(), col.matrix())));
  const double err = std::abs(direct - dense);
  return check("matrix-normal density equals the dense form", err < 1e-9, err);
}

Json variance_identity() {
  RngStream rng(104, 0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto spec = wrench::sample_system(rng, wrench::SystemBounds::design_study(), 5);
    const auto v = wrench::parametric_force_variance(spec);
    const double total = wrench::parametric_variance_sum(spec);
    worst = std::max(worst, std::abs(v.fx + v.fy - total) / total);
  }
  return check("force variances sum to the a-bar total", worst < 1e-12, worst);
}

Json wrench_no_configuration_noise() {
  wrench::RmtWrenchModel m;
  m.mean_S = Mat::Identity(2, 2);
  m.sigma_S = linalg::CovMat(Mat::Zero(2, 2));
  m.psi_S = linalg::CovMat(Mat::Identity(2, 2));
  m.mean_T = Vec::Ones(2);
  m.sigma_T = linalg::CovMat(Mat::Identity(2, 2));
  const double err = (wrench::wrench_cov_closed_form(m) - Mat::Identity(2, 2)).norm();
  return check("wrench covariance without configuration noise", err < 1e-15, err);
}

Json bessel_ratio() {
  const double z = 5.0;
  const auto r = specfun::bessel_ratio(z);
  const double err = std::abs(r.r1 - specfun::bessel_i(1, z) / specfun::bessel_i(0, z));
  return check("Bessel ratio matches I1/I0", err < 1e-13, err);
}

manipulator::TrajectoryTask short_task(const manipulator::ChainSpec& chain) {
  const Vec q0 = (Vec(3) << 1.05, 0.73, 0.8).finished();
  return manipulator::make_line_task(chain, q0, {0.02, 0.0, -0.1}, 30, 0.01);
}

Json thread_independence() {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain);
  const manipulator::GroundTruthLaw law{0.3, manipulator::NoiseMode::VelocityScaled};
  const unsigned saved = parallel::thread_count();
  parallel::set_thread_count(1);
  const auto a = manipulator::simulate_ensemble(RngStream(105, 0), chain, task, law, 16);
  parallel::set_thread_count(3);
  const auto b = manipulator::simulate_ensemble(RngStream(105, 0), chain, task, law, 16);
  parallel::set_thread_count(saved);
  double diff = 0.0;
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    for (std::size_t k = 0; k < a.runs[r].size(); ++k) diff = std::max(diff, (a.runs[r][k] - b.runs[r][k]).norm());
  }
  return check("ensembles do not depend on the thread count", diff == 0.0, diff);
}

Json filter_invariants() {
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = short_task(chain);
  const auto truth = manipulator::deterministic_trajectory(chain, task);
  const auto sensor = filter::SensorModel::drifting(task.steps());
  const auto obs = filter::simulate_observations(RngStream(106, 1), sensor, truth);
  filter::FilterOptions opt;
  opt.particles = 200;
  const auto rep = filter::sis_run(RngStream(106, 2), motion::MaxEntWishartModel(0.25, 3), sensor, obs,
                                   task, chain, truth, opt);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t k = 0; k < rep.steps(); ++k) {
    ok = ok && rep.ess[k] >= 0.5 * static_cast<double>(opt.particles);
    const double low = Eigen::SelfAdjointEigenSolver<Mat>(rep.covariance[k]).eigenvalues().minCoeff();
    worst = std::min(worst, low);
  }
  return check("filter ESS above threshold and covariance PSD", ok && worst > -1e-15, worst);
}

}  // namespace

Json run_selftest() {
  Json checks = Json::array();
  for (auto fn : {wishart_dof, gaussian_budget, lu_roundtrip, wishart_mean, matnorm_density,
                  variance_identity, wrench_no_configuration_noise, bessel_ratio,
                  thread_independence, filter_invariants}) {
    try {
      checks.push_back(fn());
    } catch (const Error& e) {
      checks.push_back({{"name", "exception"}, {"passed", false}, {"detail", e.what()}});
    }
  }
  return checks;
}

}  // namespace rmtu::cli
