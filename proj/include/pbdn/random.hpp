#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pbdn {

/// xoshiro256** stream seeded through splitmix64.
///
/// Satisfies UniformRandomBitGenerator so the standard distributions can
/// draw from it. Streams are cheap to construct; `split(i)` derives an
/// independent child stream from this stream's seed and an index without
/// advancing the parent, which is how per-hyperplane and per-sweep streams
/// are obtained in the samplers.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  std::uint64_t seed() const { return seed_; }
  RngStream split(std::uint64_t index) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

double sample_gamma(double shape, double scale, RngStream& rng);

/// Poisson(rate) conditioned on the draw being at least one.
std::int64_t sample_truncated_poisson(double rate, RngStream& rng);

/// Chinese restaurant table count: sum over n = 1..count of
/// Bernoulli(concentration / (concentration + n - 1)).
std::int64_t sample_crt(std::int64_t count, double concentration, RngStream& rng);

/// Approximate Polya-Gamma PG(shape, tilt) draw: the first five terms of the
/// infinite sum-of-gammas representation plus one gamma variate that matches
/// the mean and variance of the discarded tail.
double sample_polya_gamma(double shape, double tilt, RngStream& rng);

/// Analytic PG(shape, tilt) mean and variance.
double polya_gamma_mean(double shape, double tilt);
double polya_gamma_variance(double shape, double tilt);

std::vector<std::int64_t> sample_multinomial_partition(std::int64_t total,
                                                       std::span<const double> weights,
                                                       RngStream& rng);

/// Normal(precision^{-1} shift, precision^{-1}) via a Cholesky factor of the
/// precision. Retries once with diagonal jitter 1e-8 * trace / D.
Eigen::VectorXd sample_mvn_from_precision(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& shift, RngStream& rng);

}  // namespace pbdn
