#pragma once

#include <cstdint>
#include <random>

namespace rmtu {

/// Deterministic random stream keyed by (master_seed, stream_index). The key
/// is a SplitMix64 hash of both, so a stream depends only on its identity and
/// never on which thread consumes it or in which order streams are created.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  /// Child stream keyed by this stream's identity and `index`.
  RngStream derive(std::uint64_t index) const;

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  /// Gamma variate with the given shape and scale.
  double gamma(double shape, double scale);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

namespace specfun {

/// Modified Bessel function of the first kind, order 0 or 1. Overflows to
/// +inf above z ~ 713; use bessel_i_scaled or bessel_ratio there.
double bessel_i(int order, double z);

/// exp(-z) * I_order(z), finite for all z >= 0.
double bessel_i_scaled(int order, double z);

struct BesselRatios {
  double r1;  // I1(z) / I0(z)
  double r2;  // I1(z) / (I0(z) z)
};

BesselRatios bessel_ratio(double z);

/// log Gamma_p(a) = p(p-1)/4 log(pi) + sum_{j=1..p} log Gamma(a + (1-j)/2).
double log_multivariate_gamma(int p, double a);

struct VonMisesParams {
  VonMisesParams(double mean_angle, double concentration);

  double mean_angle;     // rad, wrapped into [0, 2 pi)
  double concentration;  // kappa > 0
};

/// Best-Fisher wrapped-Cauchy rejection sampler. Returns an angle within
/// (mean - pi, mean + pi].
double vonmises_sample(RngStream& rng, const VonMisesParams& p);

}  // namespace specfun
}  // namespace rmtu
