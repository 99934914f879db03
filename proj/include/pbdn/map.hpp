#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"
#include "pbdn/fit.hpp"
#include "pbdn/ishm.hpp"
#include "pbdn/random.hpp"

namespace pbdn {

/// Rows over which the pruning activations are drawn. A minibatch without a
/// positive row falls back to the full training set.
enum class PruneScope { full, batch };

struct MapConfig {
  std::size_t minibatch_size = 100;
  std::size_t num_batches = 4000;
  double base_lr = 0.05;
  /// Network layer T; the step size is base_lr / (4 + T).
  std::size_t layer_index = 1;
  std::size_t prune_every = 500;
  PruneScope prune_scope = PruneScope::batch;
  std::size_t k_max = 20;
  std::uint64_t seed = 0;
  double moment_decay_1 = 0.9;
  double moment_decay_2 = 0.999;
  double lr_epsilon = 1e-8;
  /// Standard deviation of the initial non-bias beta entries, in units of the
  /// inverse column spread. Each initial hyperplane passes through a random row.
  double init_sd = 5.0;
  std::ostream* trace = nullptr;
  /// Record the full-data objective after every batch into FitResult::trace.
  bool keep_trace = false;

  double learning_rate() const { return base_lr / (4.0 + static_cast<double>(layer_index)); }
  void validate() const;
};

/// Unconstrained MAP parameters: beta (D x K) and log r (K).
struct MapParams {
  Eigen::MatrixXd beta;
  Eigen::VectorXd log_r;

  std::size_t active() const { return static_cast<std::size_t>(log_r.size()); }
};

struct MapGradient {
  Eigen::MatrixXd d_beta;
  Eigen::VectorXd d_log_r;
};

/// Negative log posterior estimated from a batch of M rows out of n_total:
///   sum_k [-(gamma0/K) log r_k + c0 r_k]
///   + (a_beta + 1/2) sum_{v,k} ln(1 + beta_vk^2 / (2 b_beta))
///   + (n_total/M) sum_i [-y_i ln(1 - e^{-lambda_i}) + (1 - y_i) lambda_i].
/// b_beta is hp.b_beta_init.
double map_objective(const MapParams& params, const RowMatrix& x, std::span<const int> y,
                     std::size_t n_total, const IshmHyperparams& hp);

MapGradient map_gradient(const MapParams& params, const RowMatrix& x, std::span<const int> y,
                         std::size_t n_total, const IshmHyperparams& hp);

/// Objective and gradient in one pass.
double map_objective_and_gradient(const MapParams& params, const RowMatrix& x,
                                  std::span<const int> y, std::size_t n_total,
                                  const IshmHyperparams& hp, MapGradient& grad);

/// Bias-corrected first/second moment update.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double decay_1, double decay_2, double epsilon);

  void step(MapParams& params, const MapGradient& grad);
  /// Keeps the moment estimates of the listed hyperplanes only.
  void keep(const std::vector<Eigen::Index>& columns);
  std::size_t steps() const { return t_; }

 private:
  void init(const MapParams& params);

  double lr_;
  double decay_1_;
  double decay_2_;
  double epsilon_;
  std::size_t t_ = 0;
  MapGradient m_;
  MapGradient v_;
};

/// Activation draw used for pruning. Under the noisy-OR a row with
/// y_i = 0 has every b_ik = 0; for y_i = 1 each b_ik ~ Bernoulli(1 -
/// e^{-r_k softplus(x_i' beta_k)}), and a row left with no active hyperplane
/// gets one k drawn in proportion to those probabilities. Returns the
/// per-hyperplane activation counts.
std::vector<std::int64_t> sample_activation_counts(const MapParams& params, const Dataset& data,
                                                   RngStream& rng);
std::vector<std::int64_t> sample_activation_counts(const MapParams& params, const RowMatrix& x,
                                                   std::span<const int> y, RngStream& rng);

/// Adam over minibatches, with Bernoulli pruning every cfg.prune_every
/// batches. gamma0, c0, a_beta and b_beta are held at the values in `hp`.
FitResult run_map(const Dataset& data, const IshmHyperparams& hp, const MapConfig& cfg);

/// L2-regularized logistic regression: a single hyperplane with r fixed at 1,
/// trained with the same optimizer. The bias coefficient is not penalized.
FitResult run_logistic_map(const Dataset& data, double l2, const MapConfig& cfg);

}  // namespace pbdn
