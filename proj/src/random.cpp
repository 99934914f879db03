#include "pbdn/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "pbdn/error.hpp"

namespace pbdn {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr int kPolyaGammaTerms = 5;
constexpr std::int64_t kSmallPartition = 16;

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
}

RngStream::result_type RngStream::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

RngStream RngStream::split(std::uint64_t index) const {
  std::uint64_t x = seed_ ^ 0x6a09e667f3bcc909ULL;
  const std::uint64_t a = splitmix64(x);
  std::uint64_t y = a + index * 0xd1b54a32d192ed03ULL;
  return RngStream(splitmix64(y));
}

double RngStream::uniform() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    std::ostringstream msg;
    msg << "gamma: shape and scale must be positive and finite (shape=" << shape
        << ", scale=" << scale << ")";
    throw ParameterDomainError(msg.str());
  }
  if (shape >= 1.0) {
    return std::min(std::gamma_distribution<double>(shape, scale)(rng),
                    std::numeric_limits<double>::max());
  }
  // Gamma(a) = Gamma(a + 1) * U^{1/a}, evaluated in the log domain since
  // U^{1/a} underflows for tiny a.
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  const double log_draw = std::log(g) + std::log(rng.uniform()) / shape + std::log(scale);
  return std::clamp(std::exp(log_draw), std::numeric_limits<double>::min(),
                    std::numeric_limits<double>::max());
}

std::int64_t sample_truncated_poisson(double rate, RngStream& rng) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ParameterDomainError("truncated poisson: rate must be positive and finite");
  }
  if (rate < 1e-12) return 1;
  if (rate >= 1.0) {
    // Acceptance probability 1 - e^{-rate} >= 0.63.
    std::poisson_distribution<std::int64_t> pois(rate);
    for (;;) {
      const std::int64_t m = pois(rng);
      if (m >= 1) return m;
    }
  }
  // Inversion over k >= 1 for small rates.
  const double target = rng.uniform() * -std::expm1(-rate);
  double p = std::exp(-rate) * rate;
  double cumulative = p;
  std::int64_t k = 1;
  while (cumulative < target && p > 0.0) {
    ++k;
    p *= rate / static_cast<double>(k);
    cumulative += p;
  }
  return k;
}

std::int64_t sample_crt(std::int64_t count, double concentration, RngStream& rng) {
  if (count < 0 || !(concentration > 0.0) || !std::isfinite(concentration)) {
    throw ParameterDomainError("crt: count must be >= 0 and concentration > 0");
  }
  if (count == 0) return 0;
  std::int64_t tables = 1;
  for (std::int64_t n = 2; n <= count; ++n) {
    if (rng.uniform() < concentration / (concentration + static_cast<double>(n - 1))) ++tables;
  }
  return tables;
}

double polya_gamma_mean(double shape, double tilt) {
  const double c = std::abs(tilt);
  if (c < 1e-4) return shape * (0.25 - c * c / 48.0);
  return shape * std::tanh(0.5 * c) / (2.0 * c);
}

double polya_gamma_variance(double shape, double tilt) {
  const double c = std::abs(tilt);
  if (c < 1e-2) return shape * (1.0 / 24.0 - c * c / 120.0);
  // sinh(c) / cosh^2(c/2) = 2 tanh(c/2); the second term vanishes for large c.
  const double ch = std::cosh(0.5 * c);
  return shape * (2.0 * std::tanh(0.5 * c) - c / (ch * ch)) / (4.0 * c * c * c);
}

double sample_polya_gamma(double shape, double tilt, RngStream& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape) || !std::isfinite(tilt)) {
    throw ParameterDomainError("polya-gamma: shape must be positive and tilt finite");
  }
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  const double shift = tilt * tilt / (4.0 * pi2);

  double draw = 0.0;
  double head_mean = 0.0;
  double head_var = 0.0;
  for (int k = 1; k <= kPolyaGammaTerms; ++k) {
    const double h = static_cast<double>(k) - 0.5;
    const double d = h * h + shift;
    draw += sample_gamma(shape, 1.0, rng) / d;
    head_mean += 1.0 / d;
    head_var += 1.0 / (d * d);
  }
  draw /= 2.0 * pi2;
  head_mean *= shape / (2.0 * pi2);
  head_var *= shape / (4.0 * pi2 * pi2);

  const double tail_mean = polya_gamma_mean(shape, tilt) - head_mean;
  const double tail_var = polya_gamma_variance(shape, tilt) - head_var;
  if (tail_mean > 0.0 && tail_var > 0.0) {
    const double tail_shape = tail_mean * tail_mean / tail_var;
    // The shape underflows when the tail is negligible; use its mean then.
    draw += tail_shape > 0.0 ? sample_gamma(tail_shape, tail_var / tail_mean, rng) : tail_mean;
  }
  return draw;
}

std::vector<std::int64_t> sample_multinomial_partition(std::int64_t total,
                                                       std::span<const double> weights,
                                                       RngStream& rng) {
  if (weights.empty()) throw ParameterDomainError("multinomial: empty weight vector");
  if (total < 0) throw ParameterDomainError("multinomial: negative total");
  double sum = 0.0;
  std::ptrdiff_t last_positive = -1;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) {
      throw ParameterDomainError("multinomial: weights must be finite and non-negative");
    }
    sum += weights[j];
    if (weights[j] > 0.0) last_positive = static_cast<std::ptrdiff_t>(j);
  }
  std::vector<std::int64_t> counts(weights.size(), 0);
  if (total == 0) return counts;
  if (last_positive < 0) throw DegenerateWeightsError("multinomial: all weights are zero");

  if (total <= kSmallPartition) {
    for (std::int64_t n = 0; n < total; ++n) {
      double u = rng.uniform() * sum;
      std::ptrdiff_t j = 0;
      for (; j < last_positive; ++j) {
        u -= weights[j];
        if (u < 0.0) break;
      }
      ++counts[j];
    }
    return counts;
  }

  std::int64_t remaining = total;
  double remaining_weight = sum;
  for (std::ptrdiff_t j = 0; j < last_positive && remaining > 0; ++j) {
    if (weights[j] == 0.0) continue;
    const double p = std::clamp(weights[j] / remaining_weight, 0.0, 1.0);
    const std::int64_t x = std::binomial_distribution<std::int64_t>(remaining, p)(rng);
    counts[j] = x;
    remaining -= x;
    remaining_weight -= weights[j];
  }
  counts[last_positive] += remaining;
  return counts;
}

Eigen::VectorXd sample_mvn_from_precision(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& shift, RngStream& rng) {
  const Eigen::Index d = precision.rows();
  if (precision.cols() != d || shift.size() != d) {
    throw DimensionError("mvn: precision must be square and match the shift length");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  auto factor_ok = [&] {
    return llt.info() == Eigen::Success && llt.matrixLLT().allFinite();
  };
  if (!factor_ok()) {
    Eigen::MatrixXd jittered = precision;
    jittered.diagonal().array() += 1e-8 * precision.trace() / static_cast<double>(d);
    llt.compute(jittered);
    if (!factor_ok()) throw NumericalError("mvn: precision is not positive definite");
  }
  Eigen::VectorXd w = llt.matrixL().solve(shift);
  for (Eigen::Index i = 0; i < d; ++i) w[i] += rng.normal();
  return llt.matrixU().solve(w);
}

}  // namespace pbdn
