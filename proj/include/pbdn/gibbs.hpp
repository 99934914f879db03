#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"
#include "pbdn/fit.hpp"
#include "pbdn/ishm.hpp"
#include "pbdn/random.hpp"

namespace pbdn {

struct GibbsConfig {
  std::size_t iterations = 5000;
  double burn_fraction = 0.5;
  std::size_t prune_every = 200;
  std::size_t k_max = 20;
  std::uint64_t seed = 0;
  /// When set, one trace line per sweep is written here.
  std::ostream* trace = nullptr;
  /// Record per-sweep log-likelihood into FitResult::trace.
  bool keep_trace = false;

  void validate() const;
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// All latent variables of one iSHM sampler. N x K matrices are column-major
/// so that a hyperplane's column is contiguous.
struct GibbsState {
  std::vector<std::int64_t> m;  // N
  CountMatrix m_k;              // N x K
  Eigen::MatrixXd theta;        // N x K
  Eigen::MatrixXd omega;        // N x K
  Eigen::MatrixXd alpha;        // D x K
  Eigen::VectorXd b_beta;       // K
  CountMatrix l;                // N x K
  std::vector<std::int64_t> l_tilde;  // K
  Eigen::VectorXd p_tilde;      // K
  double gamma0 = 1.0;
  double c0 = 1.0;
  Eigen::VectorXd r;            // K
  Eigen::MatrixXd beta;         // D x K

  std::size_t active() const { return static_cast<std::size_t>(r.size()); }
  /// Sum over observations of m_ik for hyperplane k.
  std::int64_t hyperplane_count(std::size_t k) const;
  /// Drops hyperplanes whose total count is zero. Returns how many were removed.
  std::size_t prune();
  IshmModel to_model(const IshmHyperparams& hp) const;
};

/// beta = 0, r = 1/K, theta drawn from its prior, alpha = 1, b_beta = b_beta_init.
GibbsState init_gibbs_state(const Dataset& data, const IshmHyperparams& hp, std::size_t k,
                            RngStream& rng);

// Individual conditional updates, in sweep order. Each modifies `state` in place.
namespace gibbs {

/// m_i ~ y_i Pois+(theta_i.) then (m_i1..m_iK) ~ Mult(m_i, theta_i. / sum).
void update_counts(GibbsState& state, const Dataset& data, RngStream& rng);
void update_omega(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng);
void update_beta(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng);
void update_theta(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng);
void update_alpha(GibbsState& state, const IshmHyperparams& hp, std::size_t k, RngStream& rng);
void update_b_beta(GibbsState& state, const IshmHyperparams& hp, std::size_t k, RngStream& rng);
void update_tables(GibbsState& state, std::size_t k, RngStream& rng);
/// omega, beta, theta, alpha, b_beta, l for hyperplane k.
void update_hyperplane(GibbsState& state, const Dataset& data, const IshmHyperparams& hp,
                       std::size_t k, RngStream& rng);

/// Column sums sum_i softplus(x_i' beta_k).
Eigen::VectorXd softplus_totals(const GibbsState& state, const Dataset& data);
void update_gamma0(GibbsState& state, const IshmHyperparams& hp, const Eigen::VectorXd& totals,
                   RngStream& rng);
void update_r(GibbsState& state, const Eigen::VectorXd& totals, RngStream& rng);
void update_c0(GibbsState& state, const IshmHyperparams& hp, RngStream& rng);
/// l_tilde, gamma0, r, c0.
void update_globals(GibbsState& state, const Dataset& data, const IshmHyperparams& hp,
                    RngStream& rng);

}  // namespace gibbs

/// One full sweep. Per-hyperplane updates run in parallel over k, each with
/// its own stream split from `rng`, so the result does not depend on the
/// thread count.
void gibbs_step(GibbsState& state, const Dataset& data, const IshmHyperparams& hp, RngStream& rng);

/// Training log-likelihood of the current (r, beta).
double state_log_likelihood(const GibbsState& state, const Dataset& data);

/// Runs the sampler and returns the post-burn-in sample with the highest
/// training log-likelihood.
FitResult run_gibbs(const Dataset& data, const IshmHyperparams& hp, const GibbsConfig& cfg);

}  // namespace pbdn
