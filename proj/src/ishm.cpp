#include "pbdn/ishm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pbdn/error.hpp"

namespace pbdn {

namespace {

constexpr double kRateClamp = 1e3;
constexpr double kSubtypeMassFloor = 1e-12;

void check_dim(const IshmModel& model, Eigen::Index n) {
  if (static_cast<std::size_t>(n) != model.input_dim) {
    throw DimensionError("iSHM input has dimension " + std::to_string(n) + ", model expects " +
                         std::to_string(model.input_dim));
  }
}

}  // namespace

IshmHyperparams IshmHyperparams::gibbs_defaults() { return IshmHyperparams{}; }

IshmHyperparams IshmHyperparams::map_defaults() {
  IshmHyperparams hp;
  hp.a_beta = 1e-6;
  hp.b_beta_init = 1e-6;
  return hp;
}

void IshmHyperparams::validate() const {
  for (double v : {gamma0, c0, a0, b0, e0, f0, a_beta, b_beta_init}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ParameterDomainError("hyperparameters must be positive and finite");
    }
  }
  if (k_max < 1) throw ParameterDomainError("k_max must be at least 1");
}

Eigen::MatrixXd IshmModel::beta_matrix() const {
  Eigen::MatrixXd b(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) b.col(static_cast<Eigen::Index>(k)) = hyperplanes[k].beta;
  return b;
}

Eigen::VectorXd IshmModel::weights() const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) r[static_cast<Eigen::Index>(k)] = hyperplanes[k].weight;
  return r;
}

void IshmModel::sort_by_weight() {
  std::stable_sort(hyperplanes.begin(), hyperplanes.end(),
                   [](const Hyperplane& a, const Hyperplane& b) { return a.weight > b.weight; });
}

void IshmModel::validate() const {
  if (size() > hyperparams.k_max) {
    throw ParameterDomainError("model has more hyperplanes than its truncation level");
  }
  for (const auto& h : hyperplanes) {
    if (static_cast<std::size_t>(h.beta.size()) != input_dim) {
      throw DimensionError("hyperplane dimension differs from model input dimension");
    }
    if (!(h.weight > 0.0) || !h.beta.allFinite()) {
      throw ParameterDomainError("hyperplane weight must be positive and beta finite");
    }
  }
}

double rate(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_dim(model, x.size());
  double lambda = 0.0;
  for (const auto& h : model.hyperplanes) lambda += h.weight * softplus(h.beta.dot(x));
  return lambda;
}

double prob_from_rate(double lambda) { return -std::expm1(-std::min(lambda, kRateClamp)); }

double prob_one(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return prob_from_rate(rate(model, x));
}

double log_likelihood_from_rate(double lambda, int y) {
  if (y == 0) return -lambda;
  if (lambda <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(-std::expm1(-lambda));
}

double log_likelihood(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int y) {
  return log_likelihood_from_rate(rate(model, x), y);
}

double total_log_likelihood(const IshmModel& model, const Dataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += log_likelihood(model, data.row(i).transpose(), data.labels[i]);
  }
  return total;
}

double pair_prob_one(const IshmPair& pair, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double lambda = rate(pair.model_pos, x);
  const double lambda_neg = rate(pair.model_neg, x);
  return (prob_from_rate(lambda) + std::exp(-lambda_neg)) / 2.0;
}

int polytope_margin(const IshmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, double p0) {
  if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterDomainError("polytope_margin: p0 must be in (0,1)");
  check_dim(model, x.size());
  // ln[(1-p0)^{-1/r} - 1] = ln(expm1(-ln(1-p0)/r)).
  const double neg_log_keep = -std::log1p(-p0);
  int violated = 0;
  for (const auto& h : model.hyperplanes) {
    const double threshold = std::log(std::expm1(neg_log_keep / h.weight));
    if (h.beta.dot(x) > threshold) ++violated;
  }
  return violated;
}

SubtypeResult extract_subtypes(const IshmModel& model, const Dataset& data) {
  check_dim(model, static_cast<Eigen::Index>(data.dim()));
  SubtypeResult result;
  const auto v = static_cast<Eigen::Index>(data.covariates());
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto& h = model.hyperplanes[k];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(v);
    double mass = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto x = data.row(i);
      const double p = -std::expm1(-h.weight * softplus(x.dot(h.beta.transpose())));
      acc += p * x.tail(v).transpose();
      mass += p;
    }
    if (!(mass >= kSubtypeMassFloor)) {
      result.omitted.push_back(k);
      continue;
    }
    result.subtypes.push_back({acc / mass, mass, k});
  }
  return result;
}

}  // namespace pbdn
