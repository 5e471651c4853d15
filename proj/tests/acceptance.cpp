// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "helpers.hpp"
#include "rmtu/filter.hpp"
#include "rmtu/randmat.hpp"
#include "rmtu/wrench.hpp"
#include "state_awareness.hpp"

using namespace rmtu;
using testing::Mat;
using testing::Vec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double log_det(const Mat& s) { return 2.0 * s.llt().matrixLLT().diagonal().array().log().sum(); }

Outcome maxent_parameterization() {
  const Clock clock;
  const motion::MaxEntWishartModel model(0.25, 3);
  const double theta = model.theta();
  const double dof = model.perturbation_law().dof;
  RngStream rng(1, 0);
  Mat sum = Mat::Zero(3, 3);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) sum += randmat::wishart_sample(rng, model.perturbation_law()).matrix();
  const double err = testing::rel_frobenius(sum / draws, Mat::Identity(3, 3));
  const double t = clock.seconds();
  return {theta == 60.0 && dof == 64.0 && err < 0.02 && t < 10.0,
          fmt("theta=%g d=%g mean_rel_err=%.4f runtime=%.2fs", theta, dof, err, t)};
}

Outcome matnorm_second_moment() {
  const Clock clock;
  RngStream rng(2, 0);
  double worst = 0.0;
  for (int inst = 0; inst < 3; ++inst) {
    const randmat::MatrixNormalParams p(testing::random_matrix(rng, 3, 3), linalg::SpdMat(testing::random_spd(rng, 3)),
                                        linalg::SpdMat(testing::random_spd(rng, 3)));
    const Mat a = testing::random_matrix(rng, 3, 3);
    const Mat exact = (a.transpose() * p.col_cov.matrix()).trace() * p.row_cov.matrix() + p.mean * a * p.mean.transpose();
    Mat sum = Mat::Zero(3, 3);
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) {
      const Mat x = randmat::matnorm_sample(rng, p);
      sum += x * a * x.transpose();
    }
    worst = std::max(worst, testing::rel_frobenius(sum / draws, exact));
  }
  const double t = clock.seconds();
  return {worst < 0.02 && t < 60.0, fmt("worst_rel_err=%.4f over 3 instances runtime=%.2fs", worst, t)};
}

Outcome gaussian_optimizer() {
  RngStream rng(3, 0);
  double worst_trace = 0.0, worst_gap = 1e300;
  for (int inst = 0; inst < 10; ++inst) {
    const Mat mean = testing::random_matrix(rng, 3, 3);
    const double u = mean.norm() + 1.0 + 5.0 * rng.uniform();
    const motion::GaussianNoiseMatrixModel model(u, 0.05 + 0.9 * rng.uniform(), motion::NoiseTarget::Jacobian);
    const double beta = model.uncertainty_scale * model.uncertainty_scale * (u * u - mean.squaredNorm());
    const Mat s = motion::gaussian_noise_covariance(model, mean).matrix();
    worst_trace = std::max(worst_trace, std::abs(3.0 * s.trace() - beta));
    for (int alt = 0; alt < 100; ++alt) {
      Mat c = testing::random_spd(rng, 3, 0.01);
      c *= beta * rng.uniform() / (3.0 * c.trace());  // feasible: tr(n C) <= beta
      worst_gap = std::min(worst_gap, log_det(s) - log_det(c));
    }
  }
  const motion::GaussianNoiseMatrixModel worked(18.0, 0.1, motion::NoiseTarget::Jacobian);
  Mat m2 = Mat::Zero(3, 3);
  m2(0, 0) = 2.0;
  const Mat sw = motion::gaussian_noise_covariance(worked, m2).matrix();
  const double worked_err = (sw - 0.3556 * Mat::Identity(3, 3)).cwiseAbs().maxCoeff();
  const double beta_w = 0.01 * (18.0 * 18.0 - 4.0);
  return {worst_trace <= 1e-12 && worst_gap >= -1e-9 && std::abs(beta_w - 3.2) < 1e-12 && worked_err < 5e-5,
          fmt("trace_gap=%.1e min_logdet_margin=%.3g (1000 alternatives) worked beta=%.4f sigma=%.4f", worst_trace,
              worst_gap, beta_w, sw(0, 0))};
}

Outcome wrench_closed_form() {
  const Clock clock;
  RngStream rng(4, 0);
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto spec = wrench::sample_system(rng, wrench::SystemBounds::design_study(), 3 + i % 4);
    const Mat a = testing::random_matrix(rng, 2, 2);
    const auto model = wrench::model_from_spec(spec, linalg::CovMat(0.01 * a * a.transpose()));
    const Mat mc = wrench::product_mc_covariance(RngStream(4, 1 + i), model, 1000000);
    worst = std::max(worst, testing::rel_frobenius(mc, wrench::wrench_cov_closed_form(model)));
  }
  const double t = clock.seconds();
  return {worst < 0.03 && t < 60.0, fmt("worst_rel_frobenius=%.4f over 20 models runtime=%.2fs", worst, t)};
}

Outcome parametric_variances() {
  const Clock clock;
  double worst = 0.0;
  std::uint64_t cell = 0;
  for (double tension : {3.0, 4.0, 5.0}) {
    for (double tstd : {0.5, 0.75, 1.0}) {
      for (double kappa : {100.0, 800.0, 2416.0}) {
        wrench::CableSystemSpec s;
        s.mean_tensions = {tension};
        s.tension_stds = {tstd};
        s.mean_angles = {1.1};
        s.concentrations = {kappa};
        const auto v = wrench::parametric_force_variance(s);
        const Mat mc = wrench::cable_mc_covariance(RngStream(5, cell++), s, 10000000);
        worst = std::max({worst, std::abs(mc(0, 0) / v.fx - 1.0), std::abs(mc(1, 1) / v.fy - 1.0)});
      }
    }
  }
  RngStream rng(5, 1000);
  double identity = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto spec = wrench::sample_system(rng, wrench::SystemBounds::design_study(), 1 + i % 20);
    const auto v = wrench::parametric_force_variance(spec);
    const double total = wrench::parametric_variance_sum(spec);
    identity = std::max(identity, std::abs(v.fx + v.fy - total) / total);
  }
  const double t = clock.seconds();
  return {worst < 0.01 && identity <= 1e-12 && t < 300.0,
          fmt("worst_rel_err=%.4f over 27 cells identity_gap=%.1e runtime=%.1fs", worst, identity, t)};
}

Outcome error_histograms() {
  const Clock clock;
  const auto res = wrench::error_histogram_experiment(RngStream(6, 0), wrench::SystemBounds::design_study(),
                                                      {3, 5, 10, 15, 20}, 200, 500);
  const auto& m3 = res.front();
  const auto& m20 = res.back();
  const double t = clock.seconds();
  return {m3.mean <= 0.10 && m3.max <= 0.35 && m20.mean < m3.mean && t < 300.0,
          fmt("m3 mean=%.4f max=%.4f m20 mean=%.4f max=%.4f runtime=%.1fs", m3.mean, m3.max, m20.mean, m20.max, t)};
}

Outcome irobot_anchor() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Mat s = wrench::estimate_sigma_s(RngStream(seed, 0), wrench::SystemBounds::three_robot(1), 3, 1000).matrix();
    const double r0 = s(0, 0) / 4.771e-4, r1 = s(1, 1) / 6.716e-4;
    ok = ok && r0 > 1.0 / 3.0 && r0 < 3.0 && r1 > 1.0 / 3.0 && r1 < 3.0;
    detail += fmt("%s(%.3e,%.3e)", seed == 1 ? "diag per seed " : " ", s(0, 0), s(1, 1));
  }
  return {ok, detail};
}

Outcome state_awareness() {
  const auto s = testing::state_awareness_study(10000);
  const double cov = stats::coeff_of_variation(s.additive);
  return {testing::strictly_increasing(s.wishart) && testing::strictly_increasing(s.gaussian) && cov < 0.05,
          fmt("wishart std %.2e..%.2e gaussian std %.2e..%.2e additive CoV=%.4f", s.wishart.front(), s.wishart.back(),
              s.gaussian.front(), s.gaussian.back(), cov)};
}

Outcome filter_experiment() {
  const Clock clock;
  const auto chain = manipulator::ChainSpec::reference();
  const auto task = manipulator::reference_task(chain);
  const auto sensor = filter::SensorModel::drifting(task.steps());
  const std::vector<motion::RandomJacobianModel> models{
      motion::AdditiveGaussianModel{linalg::CovMat(4.4e-6 * Mat::Identity(3, 3))},
      motion::MaxEntWishartModel(0.65, 3),
      motion::GaussianNoiseMatrixModel(28.35, 0.2, motion::NoiseTarget::InverseJacobian)};
  const auto out = filter::filter_experiment(RngStream(11, 0), chain, task, {0.3, manipulator::NoiseMode::VelocityScaled},
                                             sensor, sensor.with_constant_std(0.01), models, 50, {});
  double lo = 1e300, hi = 0.0;
  for (const auto& o : out) {
    lo = std::min(lo, o.metrics.mean_abs_error);
    hi = std::max(hi, o.metrics.mean_abs_error);
  }
  const auto& add = out[0].metrics;
  const auto& wis = out[1].metrics;
  const auto& gau = out[2].metrics;
  const bool a = hi < 2.0 * lo;
  const bool b = wis.bound_error_corr > 0.6 && gau.bound_error_corr > 0.6 && add.bound_cov < 0.1;
  auto in_band = [](double c) { return c >= 0.55 && c <= 0.85; };
  const bool c = in_band(wis.coverage) && in_band(gau.coverage);
  const double t = clock.seconds();
  return {a && b && c && t < 600.0,
          fmt("mae ratio=%.3f additive CoV=%.3f corr wishart=%.3f gaussian=%.3f coverage wishart=%.3f gaussian=%.3f "
              "runtime=%.1fs",
              hi / lo, add.bound_cov, wis.bound_error_corr, gau.bound_error_corr, wis.coverage, gau.coverage, t)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "runtime.txt") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const std::map<std::string, std::string> runs{
      {"motion-mc", "--set task.steps=40 --set motion_mc.runs=24 --set motion_mc.write_runs=true"},
      {"calibrate", "--set task.steps=30 --set calibrate.runs=12 --set calibrate.inner_runs=8 "
                    "--set calibrate.refine_iterations=3"},
      {"filter", "--set task.steps=30 --set filter.runs=3 --set filter.particles=150"},
      {"wrench-cov", "--set wrench.models=3 --set wrench.draws=20000"},
      {"wrench-fit", "--set wrench.systems=200"},
      {"wrench-hist", "--set wrench.m_list=[3,5] --set wrench.n_train=60 --set wrench.n_test=60"},
      {"selftest", ""},
  };
  const fs::path root = fs::path(RMTU_TEST_SCRATCH) / "determinism";
  fs::remove_all(root);
  bool ok = true;
  std::size_t compared = 0;
  std::string failed;
  for (const auto& [cmd, args] : runs) {
    std::map<std::string, std::string> snaps[2];
    for (int t = 0; t < 2; ++t) {
      const fs::path dir = root / (cmd + (t == 0 ? "_t1" : "_t3"));
      const std::string line = std::string(RMTU_CLI) + " " + cmd + " --seed 77 --threads " + (t == 0 ? "1" : "3") +
                               " --out " + dir.string() + " " + args + " >/dev/null 2>&1";
      if (std::system(line.c_str()) != 0) {
        ok = false;
        failed += " " + cmd + "(exit)";
        continue;
      }
      snaps[t] = snapshot(dir);
    }
    if (snaps[0].empty() || snaps[0] != snaps[1]) {
      ok = false;
      failed += " " + cmd;
    }
    compared += snaps[0].size();
  }
  return {ok, fmt("%zu artifacts byte-identical across 7 subcommands at 1 and 3 threads%s%s", compared,
                  failed.empty() ? "" : "; differing:", failed.c_str())};
}

}  // namespace

int main() {
  const std::function<Outcome()> criteria[] = {maxent_parameterization, matnorm_second_moment, gaussian_optimizer,
                                               wrench_closed_form,      parametric_variances,  error_histograms,
                                               irobot_anchor,           state_awareness,       filter_experiment,
                                               determinism};
  int failures = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %zu: %s %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
