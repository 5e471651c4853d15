#include "rmtu/wrench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rmtu/parallel.hpp"

namespace rmtu::wrench {

using linalg::Index;

namespace {

constexpr std::size_t kBlock = 1 << 16;

void check_interval(const Interval& iv, const char* name, bool positive) {
  if (!(iv.lower <= iv.upper) || !std::isfinite(iv.lower) || !std::isfinite(iv.upper)) {
    throw Error(ErrorKind::DomainError, std::string(name) + " bounds are inverted or not finite");
  }
  if (positive && !(iv.lower > 0.0)) {
    throw Error(ErrorKind::DomainError, std::string(name) + " lower bound must be positive");
  }
}

// Per-block sums of centred samples, reduced in block order so the result
// does not depend on the worker count.
template <class Draw>
Mat block_covariance(const RngStream& seed, std::size_t draws, const Eigen::Vector2d& centre,
                     Draw&& draw) {
  if (draws < 2) throw Error(ErrorKind::InsufficientSamples, "covariance needs at least 2 draws");
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
  std::vector<Eigen::Vector2d> sum(blocks, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> outer(blocks, Eigen::Matrix2d::Zero());
  parallel::for_each_index(blocks, [&](std::size_t b) {
    RngStream rng = seed.derive(b);
    const std::size_t count = std::min(kBlock, draws - b * kBlock);
    for (std::size_t i = 0; i < count; ++i) {
      const Eigen::Vector2d x = draw(rng) - centre;
      sum[b] += x;
      outer[b] += x * x.transpose();
    }
  });
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  Eigen::Matrix2d o = Eigen::Matrix2d::Zero();
  for (std::size_t b = 0; b < blocks; ++b) {
    s += sum[b];
    o += outer[b];
  }
  const double n = static_cast<double>(draws);
  return (o - s * s.transpose() / n) / (n - 1.0);
}

}  // namespace

void CableSystemSpec::validate() const {
  const std::size_t m = agents();
  if (m == 0) throw Error(ErrorKind::DomainError, "cable system needs at least one agent");
  if (tension_stds.size() != m || mean_angles.size() != m || concentrations.size() != m ||
      (!offsets.empty() && offsets.size() != m)) {
    throw Error(ErrorKind::ShapeMismatch, "per-agent parameter lists differ in length");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(tension_stds[i] >= 0.0)) throw Error(ErrorKind::DomainError, "tension std must be >= 0");
    if (!(concentrations[i] > 0.0) || !std::isfinite(concentrations[i])) {
      throw Error(ErrorKind::DomainError, "concentration must be positive and finite");
    }
  }
}

void SystemBounds::validate() const {
  check_interval(concentration, "concentration", true);
  check_interval(tension_std, "tension std", false);
  check_interval(mean_tension, "mean tension", false);
  check_interval(mean_angle, "mean angle", false);
  if (tension_std.lower < 0.0) throw Error(ErrorKind::DomainError, "tension std must be >= 0");
}

SystemBounds SystemBounds::design_study() {
  constexpr double pi = std::numbers::pi;
  return {{100.0, 800.0}, {0.5, 1.0}, {3.0, 5.0}, {pi / 4.0, pi}};
}

SystemBounds SystemBounds::three_robot(int configuration) {
  constexpr double pi = std::numbers::pi;
  const Interval conc{169.35, 2416.0};
  const Interval tstd{0.48, 2.27};
  const Interval tmean{1.82, 13.89};
  switch (configuration) {
    case 1: return {conc, tstd, tmean, {0.0, 3.8}};
    case 2: return {conc, tstd, tmean, {pi / 4.0, 2.0 * pi}};
    case 3: return {conc, tstd, tmean, {0.0, 4.45}};
    default:
      throw Error(ErrorKind::DomainError, "configuration must be 1, 2 or 3");
  }
}

CableSystemSpec sample_system(RngStream& rng, const SystemBounds& bounds, std::size_t m) {
  CableSystemSpec s;
  s.concentrations.resize(m);
  s.tension_stds.resize(m);
  s.mean_tensions.resize(m);
  s.mean_angles.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    s.concentrations[i] = rng.uniform(bounds.concentration.lower, bounds.concentration.upper);
    s.tension_stds[i] = rng.uniform(bounds.tension_std.lower, bounds.tension_std.upper);
    s.mean_tensions[i] = rng.uniform(bounds.mean_tension.lower, bounds.mean_tension.upper);
    s.mean_angles[i] = rng.uniform(bounds.mean_angle.lower, bounds.mean_angle.upper);
  }
  return s;
}

RmtWrenchModel model_from_spec(const CableSystemSpec& spec, const CovMat& sigma_S) {
  spec.validate();
  const auto m = static_cast<Index>(spec.agents());
  if (sigma_S.dim() != 2) throw Error(ErrorKind::ShapeMismatch, "Sigma_S must be 2 x 2");
  RmtWrenchModel model;
  model.mean_S.resize(2, m);
  model.mean_T.resize(m);
  Vec var_T(m);
  for (Index i = 0; i < m; ++i) {
    model.mean_S(0, i) = std::cos(spec.mean_angles[i]);
    model.mean_S(1, i) = std::sin(spec.mean_angles[i]);
    model.mean_T(i) = spec.mean_tensions[i];
    var_T(i) = spec.tension_stds[i] * spec.tension_stds[i];
  }
  model.sigma_S = sigma_S;
  model.psi_S = CovMat(Mat::Identity(m, m));
  model.sigma_T = CovMat(Mat(var_T.asDiagonal()));
  return model;
}

Mat wrench_cov_closed_form(const RmtWrenchModel& model) {
  const Mat& sig_T = model.sigma_T.matrix();
  const Mat second_moment = sig_T + model.mean_T * model.mean_T.transpose();
  const double scale = (second_moment * model.psi_S.matrix()).trace();
  return scale * model.sigma_S.matrix() + model.mean_S * sig_T * model.mean_S.transpose();
}

ForceVariance parametric_force_variance(const CableSystemSpec& spec) {
  spec.validate();
  ForceVariance v;
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const auto r = specfun::bessel_ratio(spec.concentrations[i]);
    const double t = spec.mean_tensions[i];
    const double t2 = t * t + spec.tension_stds[i] * spec.tension_stds[i];
    const double a = t2 - (r.r1 * t) * (r.r1 * t);
    const double b = r.r2 * t2;
    const double c = std::cos(spec.mean_angles[i]);
    const double s = std::sin(spec.mean_angles[i]);
    const double c2 = std::cos(2.0 * spec.mean_angles[i]);
    v.fx += a * c * c - b * c2;
    v.fy += a * s * s + b * c2;
  }
  return v;
}

double parametric_variance_sum(const CableSystemSpec& spec) {
  spec.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const double r1 = specfun::bessel_ratio(spec.concentrations[i]).r1;
    const double t = spec.mean_tensions[i];
    acc += t * t + spec.tension_stds[i] * spec.tension_stds[i] - (r1 * t) * (r1 * t);
  }
  return acc;
}

Wrench mc_wrench_sample(RngStream& rng, const CableSystemSpec& spec) {
  Wrench w;
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const double t = spec.mean_tensions[i] + spec.tension_stds[i] * rng.normal();
    const double th =
        specfun::vonmises_sample(rng, {spec.mean_angles[i], spec.concentrations[i]});
    const double fx = t * std::cos(th);
    const double fy = t * std::sin(th);
    w.fx += fx;
    w.fy += fy;
    if (!spec.offsets.empty()) w.mz += spec.offsets[i].x() * fy - spec.offsets[i].y() * fx;
  }
  return w;
}

Eigen::Vector2d product_wrench_sample(RngStream& rng, const RmtWrenchModel& model) {
  const Index m = model.mean_T.size();
  Mat z(2, m);
  for (Index j = 0; j < m; ++j) {
    z(0, j) = rng.normal();
    z(1, j) = rng.normal();
  }
  Vec zt(m);
  for (Index j = 0; j < m; ++j) zt(j) = rng.normal();
  const Mat s = model.mean_S + model.sigma_S.sqrt_factor() * z * model.psi_S.sqrt_factor().transpose();
  const Vec t = model.mean_T + model.sigma_T.sqrt_factor() * zt;
  return s * t;
}

Mat product_mc_covariance(const RngStream& seed, const RmtWrenchModel& model, std::size_t draws) {
  const Eigen::Vector2d centre = model.mean_S * model.mean_T;
  return block_covariance(seed, draws, centre,
                          [&](RngStream& rng) { return product_wrench_sample(rng, model); });
}

Mat cable_mc_covariance(const RngStream& seed, const CableSystemSpec& spec, std::size_t draws) {
  spec.validate();
  Eigen::Vector2d centre = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    centre += spec.mean_tensions[i] *
              Eigen::Vector2d(std::cos(spec.mean_angles[i]), std::sin(spec.mean_angles[i]));
  }
  return block_covariance(seed, draws, centre, [&](RngStream& rng) {
    const Wrench w = mc_wrench_sample(rng, spec);
    return Eigen::Vector2d(w.fx, w.fy);
  });
}

Mat sigma_s_for_system(const CableSystemSpec& spec) {
  const ForceVariance target = parametric_force_variance(spec);
  // With Sigma_S = 0 the closed form leaves only the tension term.
  const RmtWrenchModel model = model_from_spec(spec, CovMat::zero(2));
  const Mat base = wrench_cov_closed_form(model);
  const double scale = (model.sigma_T.matrix() + model.mean_T * model.mean_T.transpose()).trace();
  Mat out = Mat::Zero(2, 2);
  if (scale > 0.0) {
    out(0, 0) = std::max(0.0, (target.fx - base(0, 0)) / scale);
    out(1, 1) = std::max(0.0, (target.fy - base(1, 1)) / scale);
  }
  return out;
}

CovMat estimate_sigma_s(const RngStream& seed, const SystemBounds& bounds, std::size_t m,
                        std::size_t n_mc) {
  bounds.validate();
  if (m == 0) throw Error(ErrorKind::DomainError, "agent count must be >= 1");
  if (n_mc == 0) throw Error(ErrorKind::InsufficientSamples, "n_mc must be >= 1");
  std::vector<Mat> per(n_mc);
  parallel::for_each_index(n_mc, [&](std::size_t j) {
    RngStream rng = seed.derive(j);
    per[j] = sigma_s_for_system(sample_system(rng, bounds, m));
  });
  Mat acc = Mat::Zero(2, 2);
  for (const auto& s : per) acc += s;
  return CovMat(acc / static_cast<double>(n_mc));
}

double relative_variance_error(const CableSystemSpec& spec, const CovMat& sigma_S) {
  const ForceVariance truth = parametric_force_variance(spec);
  const Mat cov = wrench_cov_closed_form(model_from_spec(spec, sigma_S));
  const Eigen::Vector2d t(truth.fx, truth.fy);
  return (cov.diagonal() - t).norm() / t.norm();
}

std::vector<HistogramResult> error_histogram_experiment(const RngStream& seed,
                                                        const SystemBounds& bounds,
                                                        const std::vector<std::size_t>& m_list,
                                                        std::size_t n_train, std::size_t n_test) {
  std::vector<HistogramResult> out;
  out.reserve(m_list.size());
  for (std::size_t m : m_list) {
    const RngStream mseed = seed.derive(m);
    HistogramResult r;
    r.m = m;
    r.sigma_S = estimate_sigma_s(mseed.derive(0), bounds, m, n_train);
    r.errors.resize(n_test);
    const RngStream test_seed = mseed.derive(1);
    parallel::for_each_index(n_test, [&](std::size_t j) {
      RngStream rng = test_seed.derive(j);
      r.errors[j] = relative_variance_error(sample_system(rng, bounds, m), r.sigma_S);
    });
    if (n_test > 0) {
      double acc = 0.0;
      for (double e : r.errors) acc += e;
      r.mean = acc / static_cast<double>(n_test);
      std::vector<double> sorted = r.errors;
      std::sort(sorted.begin(), sorted.end());
      r.max = sorted.back();
      const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n_test)));
      r.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rmtu::wrench
