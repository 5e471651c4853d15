#include "rmtu/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rmtu/error.hpp"

namespace rmtu {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed),
      stream_index_(stream_index),
      key_(splitmix64(splitmix64(master_seed) ^ splitmix64(~stream_index))),
      engine_(key_) {}

RngStream RngStream::derive(std::uint64_t index) const { return RngStream(key_, index); }

double RngStream::gamma(double shape, double scale) {
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

namespace specfun {

namespace {

constexpr double kSeriesLimit = 15.0;
constexpr double kNormalApproxKappa = 1e6;

// exp(-z) * sum_k (z/2)^(2k+n) / (k! (k+n)!) for small z.
double scaled_series(int order, double z) {
  const double half = 0.5 * z;
  const double q = half * half;
  double term = order == 0 ? 1.0 : half;
  double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k + order));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum * std::exp(-z);
}

// Hankel asymptotic expansion of exp(-z) I_n(z).
double scaled_asymptotic(int order, double z) {
  const double mu = 4.0 * order * order;
  double term = 1.0;
  double sum = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (8.0 * k * z);
    if (std::abs(term) > std::abs(prev)) break;  // divergent tail
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    prev = term;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * z);
}

void require_order(int order) {
  if (order != 0 && order != 1) {
    throw Error(ErrorKind::DomainError, "Bessel order must be 0 or 1");
  }
}

}  // namespace

double bessel_i_scaled(int order, double z) {
  require_order(order);
  if (!(z >= 0.0)) throw Error(ErrorKind::DomainError, "Bessel argument must be >= 0");
  return z < kSeriesLimit ? scaled_series(order, z) : scaled_asymptotic(order, z);
}

double bessel_i(int order, double z) {
  const double scaled = bessel_i_scaled(order, z);
  return scaled * std::exp(z);
}

BesselRatios bessel_ratio(double z) {
  if (!(z > 0.0)) throw Error(ErrorKind::DomainError, "Bessel ratio needs z > 0");
  const double r1 = bessel_i_scaled(1, z) / bessel_i_scaled(0, z);
  return {r1, r1 / z};
}

double log_multivariate_gamma(int p, double a) {
  if (p < 1 || !(a > 0.5 * (p - 1))) {
    throw Error(ErrorKind::DomainError, "multivariate gamma needs a > (p-1)/2");
  }
  double out = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= p; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

VonMisesParams::VonMisesParams(double mean, double kappa) : concentration(kappa) {
  if (!std::isfinite(mean)) throw Error(ErrorKind::DomainError, "von Mises mean must be finite");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorKind::DomainError, "von Mises concentration must be finite and > 0");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  mean_angle = std::fmod(mean, two_pi);
  if (mean_angle < 0.0) mean_angle += two_pi;
}

double vonmises_sample(RngStream& rng, const VonMisesParams& p) {
  const double kappa = p.concentration;
  if (kappa > kNormalApproxKappa) {
    // Deviation from the wrapped normal is O(1/kappa^2) here.
    return p.mean_angle + rng.normal() / std::sqrt(kappa);
  }
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f = 0.0;
  for (;;) {
    const double z = std::cos(std::numbers::pi * rng.uniform());
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = rng.uniform();
    if (c * (2.0 - c) - u2 > 0.0) break;
    if (u2 > 0.0 && std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  const double dev = std::acos(std::clamp(f, -1.0, 1.0));
  return rng.uniform() < 0.5 ? p.mean_angle - dev : p.mean_angle + dev;
}

}  // namespace specfun
}  // namespace rmtu
