#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"

namespace pbdn {

/// One gamma-process atom: a hyperplane `beta` (bias coefficient at index 0)
/// with a positive weight.
struct Hyperplane {
  Eigen::VectorXd beta;
  double weight = 1.0;
};

struct IshmHyperparams {
  double gamma0 = 1.0;
  double c0 = 1.0;
  double a0 = 0.01;
  double b0 = 0.01;
  double e0 = 1.0;
  double f0 = 1.0;
  double a_beta = 1e-6;
  double b_beta_init = 1.0;
  std::size_t k_max = 20;

  /// Hyperpriors used with the Gibbs sampler.
  static IshmHyperparams gibbs_defaults();
  /// gamma0 = c0 = 1 and a_beta = b_beta = 1e-6, held fixed by the MAP objective.
  static IshmHyperparams map_defaults();

  void validate() const;
};

/// A truncated iSHM holding only its active hyperplanes.
struct IshmModel {
  std::vector<Hyperplane> hyperplanes;
  std::size_t input_dim = 0;
  IshmHyperparams hyperparams;
  bool label_flipped = false;

  std::size_t size() const { return hyperplanes.size(); }
  /// D x K matrix of hyperplane coefficients.
  Eigen::MatrixXd beta_matrix() const;
  Eigen::VectorXd weights() const;
  /// Reorders hyperplanes by descending weight.
  void sort_by_weight();
  void validate() const;
};

/// Two iSHMs trained on y and on 1 - y over the same input; one network layer.
struct IshmPair {
  IshmModel model_pos;
  IshmModel model_neg;
  std::size_t layer_index = 1;

  std::size_t input_dim() const { return model_pos.input_dim; }
  std::size_t width() const { return model_pos.size() + model_neg.size(); }
};

struct Subtype {
  Eigen::VectorXd prototype;
  double mass = 0.0;
  std::size_t hyperplane_index = 0;
};

/// ln(1 + e^z) without overflow.
inline double softplus(double z) {
  return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Sum of weight_k * softplus(beta_k' x).
double rate(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// P(y = 1 | x) = 1 - exp(-rate); the rate is clamped at 1e3.
double prob_one(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double prob_from_rate(double lambda);

/// ln P(y | x). For y = 1 and a zero rate the result is -infinity.
double log_likelihood(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int y);
double log_likelihood_from_rate(double lambda, int y);

/// Sum of log_likelihood over a dataset.
double total_log_likelihood(const IshmModel& model, const Dataset& data);

/// Averaged pair probability ((1 - e^{-lambda}) + e^{-lambda*}) / 2.
double pair_prob_one(const IshmPair& pair, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Number of hyperplanes for which beta_k' x exceeds
/// ln[(1 - p0)^{-1/r_k} - 1]; zero means x lies in the bounding polytope.
int polytope_margin(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double p0);

struct SubtypeResult {
  std::vector<Subtype> subtypes;
  /// Indices of hyperplanes whose total activation mass fell below 1e-12.
  std::vector<std::size_t> omitted;
};

/// Activation-weighted covariate means, one per hyperplane.
SubtypeResult extract_subtypes(const IshmModel& model, const Dataset& data);

}  // namespace pbdn
