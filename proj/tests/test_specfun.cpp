#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <vector>

#include "helpers.hpp"
#include "rmtu/parallel.hpp"

using namespace rmtu;
using namespace rmtu::specfun;
using testing::bessel_series;

namespace {

constexpr double kPi = std::numbers::pi;

// mpmath at 30 digits.
struct BesselRef {
  double z, i0, i1, ratio, i0_scaled;
};
constexpr BesselRef kBesselRef[] = {
    {2.0, 2.27958530233606726744, 1.59063685463732906338, 0.697774657964007982007, 0.308508322553671039533},
    {14.9, 308375.578687439199873, 297840.694779574310559, 0.965837489619945712714, 0.104253872824291253733},
    {15.1, 374103.411190408985109, 361495.566185401611062, 0.966298502959679493009, 0.103548781205769686072},
    {50.0, 2.93255378384933632665e20, 2.90307859010355679675e20, 0.989948967378497752593, 0.0565616266474541925300},
    {169.35, 1.08295269850937223694e72, 1.07975057002698135356e72, 0.997043150188555376610, 0.0306788430411588543538},
    {700.0, 1.52959334767187373632e302, 1.52850039023390068815e302, 0.999285458818426093273, 0.0150812956515313575870},
    {2000.0, 0.0, 0.0, 0.999749968734362780257, 0.00892117827643967027309},
};

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

// Inverse-CDF sampler from a trapezoid integration of the unnormalized
// density exp(kappa (cos(x - mu) - 1)) over (mu - pi, mu + pi].
class InverseCdfVonMises {
 public:
  InverseCdfVonMises(double mu, double kappa, std::size_t cells = 400000) : x_(cells + 1), cdf_(cells + 1) {
    const double h = 2.0 * kPi / static_cast<double>(cells);
    double prev = 0.0;
    for (std::size_t i = 0; i <= cells; ++i) {
      x_[i] = mu - kPi + h * static_cast<double>(i);
      const double f = std::exp(kappa * (std::cos(x_[i] - mu) - 1.0));
      cdf_[i] = i == 0 ? 0.0 : cdf_[i - 1] + 0.5 * h * (prev + f);
      prev = f;
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double operator()(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t i = std::max<std::size_t>(1, static_cast<std::size_t>(it - cdf_.begin()));
    const double w = (u - cdf_[i - 1]) / (cdf_[i] - cdf_[i - 1]);
    return x_[i - 1] + w * (x_[i] - x_[i - 1]);
  }

 private:
  std::vector<double> x_, cdf_;
};

}  // namespace

TEST_SUITE("specfun") {

TEST_CASE("Bessel values at zero") {
  CHECK(bessel_i(0, 0.0) == 1.0);
  CHECK(bessel_i(1, 0.0) == 0.0);
  CHECK_THROWS_AS(bessel_i(2, 1.0), Error);
  CHECK_THROWS_AS(bessel_i(0, -1.0), Error);
}

TEST_CASE("Bessel I0 at 2 matches a 60-term power series") {
  CHECK(std::abs(bessel_i(0, 2.0) - bessel_series(0, 2.0)) <= 1e-12 * bessel_series(0, 2.0));
  CHECK(std::abs(bessel_i(1, 2.0) - bessel_series(1, 2.0)) <= 1e-12 * bessel_series(1, 2.0));
}

TEST_CASE("Bessel functions against high-precision references") {
  for (const auto& r : kBesselRef) {
    CAPTURE(r.z);
    if (r.i0 > 0.0) {
      CHECK(bessel_i(0, r.z) == doctest::Approx(r.i0).epsilon(1e-12));
      CHECK(bessel_i(1, r.z) == doctest::Approx(r.i1).epsilon(1e-12));
    }
    CHECK(bessel_i_scaled(0, r.z) == doctest::Approx(r.i0_scaled).epsilon(1e-12));
    CHECK(bessel_ratio(r.z).r1 == doctest::Approx(r.ratio).epsilon(1e-12));
  }
}

TEST_CASE("Bessel ratio limits and consistency") {
  CHECK(bessel_ratio(2000.0).r1 > 0.999);
  CHECK(bessel_ratio(2000.0).r1 == doctest::Approx(1.0 - 1.0 / 4000.0).epsilon(1e-6));
  const double r169 = bessel_series(1, 169.35, 400) / bessel_series(0, 169.35, 400);
  CHECK(bessel_ratio(169.35).r1 == doctest::Approx(r169).epsilon(1e-12));
  for (double z : {0.01, 0.5, 3.0, 14.99, 15.01, 80.0, 900.0, 5000.0}) {
    const auto r = bessel_ratio(z);
    CHECK(r.r2 == doctest::Approx(r.r1 / z).epsilon(1e-14));
  }
  CHECK_THROWS_AS(bessel_ratio(0.0), Error);
}

TEST_CASE("Bessel monotonicity and bounds") {
  double prev = bessel_i(0, 0.0);
  for (double z = 0.05; z < 700.0; z *= 1.1) {
    const double i0 = bessel_i(0, z);
    CHECK(i0 >= 1.0);
    CHECK(i0 > prev);
    CHECK(bessel_i(1, z) >= 0.0);
    const double r1 = bessel_ratio(z).r1;
    CHECK(r1 > 0.0);
    CHECK(r1 < 1.0);
    prev = i0;
  }
}

TEST_CASE("log multivariate gamma") {
  for (double a : {0.7, 1.5, 4.2, 30.0}) CHECK(log_multivariate_gamma(1, a) == doctest::Approx(std::lgamma(a)));
  const double direct = 0.5 * std::log(kPi) + std::lgamma(2.0) + std::lgamma(1.5);
  CHECK(log_multivariate_gamma(2, 2.0) == doctest::Approx(direct).epsilon(1e-14));
  CHECK_THROWS_AS(log_multivariate_gamma(3, 1.0), Error);
}

TEST_CASE("von Mises circular mean") {
  RngStream rng(10, 0);
  const VonMisesParams p(kPi / 2.0, 500.0);
  double s = 0.0, c = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = vonmises_sample(rng, p);
    s += std::sin(x);
    c += std::cos(x);
  }
  CHECK(std::abs(std::atan2(s, c) - kPi / 2.0) < 0.01);
}

TEST_CASE("von Mises mean resultant length") {
  RngStream rng(11, 0);
  const VonMisesParams p(1.0, 100.0);
  double s = 0.0, c = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = vonmises_sample(rng, p);
    s += std::sin(x);
    c += std::cos(x);
  }
  CHECK(std::abs(std::hypot(s, c) / n - bessel_ratio(100.0).r1) < 0.005);
}

TEST_CASE("von Mises tail at the lowest identified concentration") {
  RngStream rng(12, 0);
  const VonMisesParams p(2.0, 169.35);
  int inside = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) inside += std::abs(vonmises_sample(rng, p) - 2.0) <= 0.35 ? 1 : 0;
  CHECK(static_cast<double>(inside) / n > 0.999);
}

TEST_CASE("von Mises sampler passes a two-sample KS test against inverse-CDF draws") {
  const std::size_t n = 20000;
  // Critical value of the two-sample statistic at the 1% level.
  const double critical = 1.628 * std::sqrt(2.0 / static_cast<double>(n));
  for (double kappa : {1.0, 50.0, 800.0}) {
    CAPTURE(kappa);
    const double mu = 0.7;
    RngStream a(13, static_cast<std::uint64_t>(kappa)), b(14, static_cast<std::uint64_t>(kappa));
    const InverseCdfVonMises inv(mu, kappa);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = vonmises_sample(a, VonMisesParams(mu, kappa));
      ys[i] = inv(b.uniform());
    }
    CHECK(ks_statistic(xs, ys) < critical);
  }
}

TEST_CASE("von Mises parameter validation") {
  CHECK_THROWS_AS(VonMisesParams(0.0, 0.0), Error);
  CHECK_THROWS_AS(VonMisesParams(0.0, -1.0), Error);
  const VonMisesParams wrapped(-0.5, 3.0);
  CHECK(wrapped.mean_angle == doctest::Approx(2.0 * kPi - 0.5));
}

TEST_CASE("RngStream identity determines the sequence") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && x == b.next_u64();
    any_diff = any_diff || x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
  CHECK(RngStream(1, 0).derive(5).next_u64() == RngStream(1, 0).derive(5).next_u64());
  CHECK(RngStream(1, 0).derive(5).next_u64() != RngStream(2, 0).derive(5).next_u64());
}

TEST_CASE("RngStream output does not depend on the worker count") {
  auto run = [](unsigned threads) {
    parallel::set_thread_count(threads);
    std::vector<double> out(64);
    parallel::for_each_index(out.size(), [&](std::size_t i) {
      RngStream rng = RngStream(99, 0).derive(i);
      double acc = 0.0;
      for (int k = 0; k < 1000; ++k) acc += rng.normal() + rng.gamma(2.5, 1.0);
      out[i] = acc;
    });
    return out;
  };
  const unsigned saved = parallel::thread_count();
  const auto one = run(1);
  CHECK(run(2) == one);
  CHECK(run(8) == one);
  parallel::set_thread_count(saved);
}

}  // TEST_SUITE
