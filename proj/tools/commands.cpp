#include "commands.hpp"

#include <algorithm>
#include <cmath>

#include "rmtu/calibration.hpp"
#include "rmtu/filter.hpp"
#include "rmtu/manipulator.hpp"
#include "rmtu/stats.hpp"
#include "rmtu/wrench.hpp"

namespace rmtu::cli {

namespace {

using linalg::CovMat;
using linalg::Mat;
using linalg::Vec;
using manipulator::ChainSpec;
using manipulator::TrajectoryTask;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

Json to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec to_vec(const std::vector<double>& xs) { return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size())); }

// Library constructors validate their inputs; while the configuration is
// being turned into objects any such failure is reported as a config error.
template <class Fn>
auto prepare(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    config_error(what + ": " + e.what());
  }
}

struct Arm {
  ChainSpec chain;
  TrajectoryTask task;
  manipulator::GroundTruthLaw law;
};

Arm build_arm(const Config& cfg) {
  return prepare("invalid arm setup", [&] {
    const auto lengths = cfg.reals("chain", "link_lengths");
    const auto lower = cfg.reals("chain", "joint_lower");
    const auto upper = cfg.reals("chain", "joint_upper");
    if (lengths.size() != 3) config_error("chain.link_lengths: the planar task space needs three joints");
    if (lower.size() != lengths.size() || upper.size() != lengths.size()) {
      config_error("chain.joint_lower and chain.joint_upper need one entry per link");
    }
    std::vector<manipulator::JointLimit> limits;
    for (std::size_t i = 0; i < lower.size(); ++i) limits.push_back({lower[i], upper[i]});
    ChainSpec chain(lengths, limits);

    const auto q0 = cfg.reals("task", "q0");
    const auto d = cfg.reals("task", "displacement");
    if (q0.size() != lengths.size()) config_error("task.q0 needs one angle per joint");
    if (d.size() != 3) config_error("task.displacement is [dx, dy, dphi]");
    const auto steps = cfg.count("task", "steps");
    const double dt = cfg.real("task", "dt");
    if (steps == 0 || !(dt > 0.0)) config_error("task.steps and task.dt must be positive");
    TrajectoryTask task = manipulator::make_line_task(chain, to_vec(q0), {d[0], d[1], d[2]}, steps, dt);

    manipulator::GroundTruthLaw law;
    law.noise_gain = cfg.real("truth", "noise_gain");
    const auto mode = cfg.text("truth", "mode");
    if (mode == "velocity_scaled") {
      law.mode = manipulator::NoiseMode::VelocityScaled;
    } else if (mode == "constant") {
      law.mode = manipulator::NoiseMode::Constant;
    } else {
      config_error("truth.mode must be velocity_scaled or constant");
    }
    if (!(law.noise_gain >= 0.0)) config_error("truth.noise_gain must be non-negative");
    return Arm{std::move(chain), std::move(task), law};
  });
}

motion::NoiseTarget parse_target(const std::string& s, const std::string& key) {
  if (s == "inverse") return motion::NoiseTarget::InverseJacobian;
  if (s == "jacobian") return motion::NoiseTarget::Jacobian;
  config_error(key + " must be inverse or jacobian");
}

std::vector<motion::RandomJacobianModel> build_models(const Config& cfg, int n) {
  return prepare("invalid motion model", [&] {
    const double var = cfg.real("models", "additive_variance");
    if (!(var >= 0.0)) config_error("models.additive_variance must be non-negative");
    return std::vector<motion::RandomJacobianModel>{
        motion::AdditiveGaussianModel{CovMat(Mat::Identity(n, n) * var)},
        motion::MaxEntWishartModel(cfg.real("models", "wishart_dispersion"), n),
        motion::GaussianNoiseMatrixModel(
            cfg.real("models", "gaussian_norm_bound"), cfg.real("models", "gaussian_alpha"),
            parse_target(cfg.text("models", "gaussian_target"), "models.gaussian_target")),
    };
  });
}

wrench::SystemBounds build_bounds(const Config& cfg) {
  const auto preset = cfg.text("wrench", "bounds");
  wrench::SystemBounds b;
  if (preset == "design_study") {
    b = wrench::SystemBounds::design_study();
  } else if (preset == "c1" || preset == "c2" || preset == "c3") {
    b = wrench::SystemBounds::three_robot(preset[1] - '0');
  } else {
    config_error("wrench.bounds must be design_study, c1, c2 or c3");
  }
  auto apply = [&](const char* key, wrench::Interval& iv) {
    const auto xs = cfg.reals("wrench", key);
    if (xs.empty()) return;
    if (xs.size() != 2) config_error(std::string("wrench.") + key + " is [lower, upper]");
    iv = {xs[0], xs[1]};
  };
  apply("concentration", b.concentration);
  apply("tension_std", b.tension_std);
  apply("mean_tension", b.mean_tension);
  apply("mean_angle", b.mean_angle);
  prepare("invalid wrench bounds", [&] {
    b.validate();
    return 0;
  });
  return b;
}

std::size_t agents(const Config& cfg) {
  const auto m = cfg.count("wrench", "agents");
  if (m == 0) config_error("wrench.agents must be at least 1");
  return m;
}

RngStream root_stream(const Config& cfg) { return RngStream(cfg.count("run", "seed"), 0); }

std::vector<Vec> std_series(const manipulator::Ensemble& e) {
  std::vector<Vec> out;
  for (const auto& c : manipulator::ensemble_covariance(e)) out.push_back(c.diagonal().cwiseMax(0.0).cwiseSqrt());
  return out;
}

int motion_mc(const Config& cfg, const OutputDir& out) {
  const Arm arm = build_arm(cfg);
  const auto models = build_models(cfg, static_cast<int>(arm.chain.joints()));
  const auto runs = cfg.count("motion_mc", "runs");
  if (runs < 2) config_error("motion_mc.runs must be at least 2");
  manipulator::check_task(arm.chain, arm.task);

  const RngStream root = root_stream(cfg);
  std::vector<std::string> names{"truth"};
  std::vector<std::vector<Vec>> stds;
  const auto truth = manipulator::simulate_ensemble(root.derive(0), arm.chain, arm.task, arm.law, runs);
  stds.push_back(std_series(truth));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto e = manipulator::simulate_model_ensemble(root.derive(1 + i), arm.chain, arm.task, models[i], runs);
    names.emplace_back(motion::model_name(models[i]));
    stds.push_back(std_series(e));
  }
  const auto nominal = manipulator::deterministic_trajectory(arm.chain, arm.task);

  const auto n = arm.chain.joints();
  auto csv = out.open_csv("std.csv");
  csv.precision(15);
  csv << "k,t,sigma_min";
  for (const auto& name : names) {
    for (std::size_t j = 1; j <= n; ++j) csv << ',' << csv_field(name + "_std" + std::to_string(j));
  }
  csv << '\n';
  for (std::size_t k = 0; k < nominal.size(); ++k) {
    csv << k << ',' << static_cast<double>(k) * arm.task.dt << ','
        << manipulator::min_singular_value(manipulator::jacobian(nominal[k], arm.chain));
    for (const auto& s : stds) {
      for (std::size_t j = 0; j < n; ++j) csv << ',' << s[k](static_cast<Eigen::Index>(j));
    }
    csv << '\n';
  }

  // Joint-averaged std per step (k >= 1) summarizes each source.
  auto joint_mean = [](const std::vector<Vec>& s) {
    std::vector<double> m;
    for (std::size_t k = 1; k < s.size(); ++k) m.push_back(s[k].mean());
    return m;
  };
  const auto truth_series = joint_mean(stds.front());
  Json sources = Json::array();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto series = joint_mean(stds[i]);
    sources.push_back({{"name", names[i]},
                       {"final_std", series.back()},
                       {"mean_std", stats::mean(series)},
                       {"corr_with_truth", stats::pearson(series, truth_series)}});
  }
  if (cfg.flag("motion_mc", "write_runs")) {
    auto runs_csv = out.open_csv("truth_runs.csv");
    manipulator::write_ensemble_csv(runs_csv, truth);
  }
  out.write_json("summary.json", {{"runs", runs}, {"steps", arm.task.steps()}, {"sources", sources}});
  return 0;
}

int calibrate(const Config& cfg, const OutputDir& out) {
  const Arm arm = build_arm(cfg);
  calibration::CalibrationWeights w{cfg.real("calibrate", "alpha1"), cfg.real("calibrate", "alpha2"),
                                    cfg.real("calibrate", "beta1"), cfg.real("calibrate", "beta2")};
  prepare("invalid calibration weights", [&] {
    w.validate();
    return 0;
  });
  const auto runs = cfg.count("calibrate", "runs");
  if (runs < 2) config_error("calibrate.runs must be at least 2");
  const RngStream root = root_stream(cfg);

  calibration::CalibrateOptions opt;
  opt.relative_residuals = cfg.flag("calibrate", "relative_residuals");
  opt.gaussian.target = parse_target(cfg.text("calibrate", "target"), "calibrate.target");
  opt.gaussian.inner_runs = cfg.count("calibrate", "inner_runs");
  opt.gaussian.refine_iterations = cfg.count("calibrate", "refine_iterations");
  opt.gaussian.u_tilde_grid = cfg.reals("calibrate", "u_tilde_grid");
  opt.gaussian.alpha_grid = cfg.reals("calibrate", "alpha_grid");
  opt.gaussian.inner_seed = root.derive(1).next_u64();
  if (opt.gaussian.inner_runs < 2) config_error("calibrate.inner_runs must be at least 2");
  if (opt.gaussian.u_tilde_grid.empty() || opt.gaussian.alpha_grid.empty()) {
    config_error("calibrate grids must not be empty");
  }
  for (double a : opt.gaussian.alpha_grid) {
    if (!(a > 0.0 && a <= 1.0)) config_error("calibrate.alpha_grid values must lie in (0, 1]");
  }
  for (double u : opt.gaussian.u_tilde_grid) {
    if (!(u > 0.0)) config_error("calibrate.u_tilde_grid values must be positive");
  }

  manipulator::check_task(arm.chain, arm.task);
  const auto data = manipulator::simulate_ensemble(root.derive(0), arm.chain, arm.task, arm.law, runs);
  const auto res = calibration::calibrate(data, arm.task, arm.chain, w, opt);

  auto csv = out.open_csv("sigma_b.csv");
  csv.precision(15);
  csv << "k,t,sigma_B\n";
  for (std::size_t k = 0; k < res.sigma_B_per_step.size(); ++k) {
    csv << k << ',' << static_cast<double>(k) * arm.task.dt << ',' << res.sigma_B_per_step[k] << '\n';
  }

  const Mat& so = res.sigma_omega.matrix();
  const Json gaussian{{"u", res.gaussian.u},
                      {"u_tilde", res.gaussian.u_tilde},
                      {"alpha", res.gaussian.alpha},
                      {"objective", res.gaussian.objective},
                      {"target", cfg.text("calibrate", "target")}};
  out.write_json("calibration.json",
                 {{"runs", runs},
                  {"sigma_omega", to_json(so)},
                  {"sigma_B", res.sigma_B},
                  {"gaussian", gaussian},
                  {"weights", {{"alpha1", w.alpha1}, {"alpha2", w.alpha2}, {"beta1", w.beta1}, {"beta2", w.beta2}}},
                  {"models_block",
                   {{"additive_variance", so.trace() / static_cast<double>(so.rows())},
                    {"wishart_dispersion", res.sigma_B},
                    {"gaussian_norm_bound", res.gaussian.u},
                    {"gaussian_alpha", res.gaussian.alpha},
                    {"gaussian_target", cfg.text("calibrate", "target")}}}});
  return 0;
}

int filter(const Config& cfg, const OutputDir& out) {
  const Arm arm = build_arm(cfg);
  const auto models = build_models(cfg, static_cast<int>(arm.chain.joints()));
  const auto runs = cfg.count("filter", "runs");
  filter::FilterOptions opt;
  opt.particles = cfg.count("filter", "particles");
  const auto resample = cfg.text("filter", "resample");
  if (resample == "systematic") {
    opt.resample = filter::ResamplePolicy::SystematicOnLowEss;
  } else if (resample == "none") {
    opt.resample = filter::ResamplePolicy::None;
  } else {
    config_error("filter.resample must be systematic or none");
  }
  if (runs == 0) config_error("filter.runs must be at least 1");
  if (opt.particles < 2) config_error("filter.particles must be at least 2");
  const auto n = static_cast<Eigen::Index>(arm.chain.joints());
  const auto [truth_sensor, likelihood] = prepare("invalid sensor", [&] {
    filter::DriftProfile p{cfg.real("sensor", "final_bias"), cfg.real("sensor", "base_std"),
                           cfg.real("sensor", "std_amplitude")};
    auto s = filter::SensorModel::drifting(arm.task.steps(), n, p);
    auto l = s.with_constant_std(cfg.real("sensor", "likelihood_std"));
    return std::pair{s, l};
  });

  manipulator::check_task(arm.chain, arm.task);
  const auto outcomes = filter::filter_experiment(root_stream(cfg), arm.chain, arm.task, arm.law,
                                                  truth_sensor, likelihood, models, runs, opt);

  auto csv = out.open_csv("metrics.csv");
  csv.precision(15);
  csv << "model,mean_abs_error,bound_cov,bound_error_corr,coverage\n";
  Json summary = Json::array();
  for (const auto& o : outcomes) {
    const auto& m = o.metrics;
    csv << csv_field(o.model) << ',' << m.mean_abs_error << ',' << m.bound_cov << ','
        << m.bound_error_corr << ',' << m.coverage << '\n';
    summary.push_back({{"model", o.model},
                       {"mean_abs_error", m.mean_abs_error},
                       {"bound_cov", m.bound_cov},
                       {"bound_error_corr", m.bound_error_corr},
                       {"coverage", m.coverage}});
    if (cfg.flag("filter", "write_runs")) {
      for (std::size_t r = 0; r < o.reports.size(); ++r) {
        auto run_csv = out.open_csv("reports/" + o.model + "/run_" + std::to_string(r) + ".csv");
        filter::write_report_csv(run_csv, o.reports[r], arm.task.dt);
      }
    }
  }
  out.write_json("summary.json", {{"runs", runs},
                                  {"particles", opt.particles},
                                  {"resample", resample},
                                  {"models", summary}});
  return 0;
}

int wrench_cov(const Config& cfg, const OutputDir& out) {
  const auto bounds = build_bounds(cfg);
  const auto m = agents(cfg);
  const auto count = cfg.count("wrench", "models");
  const auto draws = cfg.count("wrench", "draws");
  const auto fixed = cfg.reals("wrench", "sigma_s");
  if (!fixed.empty() && (fixed.size() != 2 || fixed[0] < 0.0 || fixed[1] < 0.0)) {
    config_error("wrench.sigma_s is the non-negative diagonal [s_xx, s_yy]");
  }
  if (draws < 2) config_error("wrench.draws must be at least 2");
  const RngStream root = root_stream(cfg);

  auto csv = out.open_csv("wrench_cov.csv");
  csv.precision(15);
  csv << "model,cf_xx,cf_xy,cf_yy,mc_xx,mc_xy,mc_yy,rel_frobenius_error,param_var_fx,param_var_fy\n";
  std::vector<double> errors;
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng = root.derive(0).derive(i);
    const auto spec = wrench::sample_system(rng, bounds, m);
    const Mat sigma_s = fixed.empty() ? wrench::sigma_s_for_system(spec)
                                      : Mat(Eigen::Vector2d(fixed[0], fixed[1]).asDiagonal());
    const auto model = wrench::model_from_spec(spec, CovMat(sigma_s));
    const Mat cf = wrench::wrench_cov_closed_form(model);
    const Mat mc = wrench::product_mc_covariance(root.derive(1).derive(i), model, draws);
    const double err = (cf - mc).norm() / mc.norm();
    const auto pv = wrench::parametric_force_variance(spec);
    errors.push_back(err);
    csv << i << ',' << cf(0, 0) << ',' << cf(0, 1) << ',' << cf(1, 1) << ',' << mc(0, 0) << ','
        << mc(0, 1) << ',' << mc(1, 1) << ',' << err << ',' << pv.fx << ',' << pv.fy << '\n';
  }
  Json summary{{"models", count}, {"agents", m}, {"draws", draws}};
  summary["max_rel_error"] = errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end());
  summary["mean_rel_error"] = stats::mean(errors);
  out.write_json("summary.json", summary);
  return 0;
}

int wrench_fit(const Config& cfg, const OutputDir& out) {
  const auto bounds = build_bounds(cfg);
  const auto m = agents(cfg);
  const auto systems = cfg.count("wrench", "systems");
  if (systems == 0) config_error("wrench.systems must be at least 1");
  const auto sigma = wrench::estimate_sigma_s(root_stream(cfg), bounds, m, systems);
  out.write_json("sigma_s.json", {{"agents", m},
                                  {"systems", systems},
                                  {"sigma_S", to_json(sigma.matrix())},
                                  {"diagonal", to_json(Vec(sigma.matrix().diagonal()))}});
  return 0;
}

int wrench_hist(const Config& cfg, const OutputDir& out) {
  const auto bounds = build_bounds(cfg);
  const auto ms = cfg.counts("wrench", "m_list");
  const auto n_train = cfg.count("wrench", "n_train");
  const auto n_test = cfg.count("wrench", "n_test");
  if (ms.empty() || std::find(ms.begin(), ms.end(), 0u) != ms.end()) {
    config_error("wrench.m_list needs positive agent counts");
  }
  if (n_train == 0) config_error("wrench.n_train must be at least 1");
  const std::vector<std::size_t> m_list(ms.begin(), ms.end());
  const auto results = wrench::error_histogram_experiment(root_stream(cfg), bounds, m_list, n_train, n_test);

  auto csv = out.open_csv("errors.csv");
  csv.precision(15);
  csv << "m,trial,rel_error\n";
  Json summary = Json::array();
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.errors.size(); ++t) csv << r.m << ',' << t << ',' << r.errors[t] << '\n';
    summary.push_back({{"m", r.m},
                       {"mean", r.mean},
                       {"max", r.max},
                       {"p95", r.p95},
                       {"sigma_S_diagonal", to_json(Vec(r.sigma_S.matrix().diagonal()))}});
  }
  out.write_json("summary.json", {{"n_train", n_train}, {"n_test", n_test}, {"histograms", summary}});
  return 0;
}

int selftest(const Config&, const OutputDir& out) {
  const Json checks = run_selftest();
  bool ok = true;
  for (const auto& c : checks) ok = ok && c["passed"].get<bool>();
  out.write_json("selftest.json", {{"passed", ok}, {"checks", checks}});
  return ok ? 0 : 3;
}

}  // namespace

int run_command(const Config& cfg, const OutputDir& out) {
  const auto& c = cfg.command();
  if (c == "motion-mc") return motion_mc(cfg, out);
  if (c == "calibrate") return calibrate(cfg, out);
  if (c == "filter") return filter(cfg, out);
  if (c == "wrench-cov") return wrench_cov(cfg, out);
  if (c == "wrench-fit") return wrench_fit(cfg, out);
  if (c == "wrench-hist") return wrench_hist(cfg, out);
  if (c == "selftest") return selftest(cfg, out);
  config_error("unknown subcommand " + c);
}

}  // namespace rmtu::cli
