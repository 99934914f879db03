#include "pbdn/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <span>
#include <string>

#include "pbdn/error.hpp"
#include "pbdn/kernels.hpp"

namespace pbdn {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

// Bounds on alpha that keep the beta precision matrix finite.
constexpr double kPrecisionFloor = 1e-300;
constexpr double kPrecisionCeiling = 1e300;

// Gamma scale 1 / rate, kept finite and positive when an unused hyperplane
// drifts far enough for the rate to overflow or underflow.
double scale_from_rate(double rate) {
  return std::clamp(1.0 / rate, kTiny, std::numeric_limits<double>::max());
}

// Stream layout inside one sweep.
constexpr std::uint64_t kCountsStream = 0;
constexpr std::uint64_t kGlobalsStream = 1;
constexpr std::uint64_t kFirstHyperplaneStream = 2;

template <typename Matrix>
Matrix keep_columns(const Matrix& src, const std::vector<Eigen::Index>& keep) {
  Matrix out(src.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = src.col(keep[j]);
  return out;
}

Eigen::VectorXd keep_entries(const Eigen::VectorXd& src, const std::vector<Eigen::Index>& keep) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out[static_cast<Eigen::Index>(j)] = src[keep[j]];
  return out;
}

}  // namespace

void GibbsConfig::validate() const {
  if (iterations < 1) throw ParameterDomainError("gibbs: iterations must be positive");
  if (!(burn_fraction >= 0.0 && burn_fraction < 1.0)) {
    throw ParameterDomainError("gibbs: burn_fraction must be in [0,1)");
  }
  if (prune_every < 1 || prune_every > iterations) {
    throw ParameterDomainError("gibbs: prune_every must be in [1, iterations]");
  }
  if (k_max < 1) throw ParameterDomainError("gibbs: k_max must be positive");
}

std::int64_t GibbsState::hyperplane_count(std::size_t k) const {
  return m_k.col(static_cast<Eigen::Index>(k)).sum();
}

std::size_t GibbsState::prune() {
  std::vector<Eigen::Index> keep;
  for (std::size_t k = 0; k < active(); ++k) {
    if (hyperplane_count(k) > 0) keep.push_back(static_cast<Eigen::Index>(k));
  }
  const std::size_t removed = active() - keep.size();
  if (removed == 0) return 0;
  m_k = keep_columns(m_k, keep);
  theta = keep_columns(theta, keep);
  omega = keep_columns(omega, keep);
  alpha = keep_columns(alpha, keep);
  l = keep_columns(l, keep);
  beta = keep_columns(beta, keep);
  b_beta = keep_entries(b_beta, keep);
  p_tilde = keep_entries(p_tilde, keep);
  r = keep_entries(r, keep);
  std::vector<std::int64_t> lt;
  for (auto k : keep) lt.push_back(l_tilde[static_cast<std::size_t>(k)]);
  l_tilde = std::move(lt);
  return removed;
}

IshmModel GibbsState::to_model(const IshmHyperparams& hp) const {
  IshmModel model;
  model.input_dim = static_cast<std::size_t>(beta.rows());
  model.hyperparams = hp;
  for (Eigen::Index k = 0; k < r.size(); ++k) model.hyperplanes.push_back({beta.col(k), r[k]});
  model.sort_by_weight();
  return model;
}

GibbsState init_gibbs_state(const Dataset& data, const IshmHyperparams& hp, std::size_t k,
                            RngStream& rng) {
  hp.validate();
  if (k < 1) throw ParameterDomainError("gibbs: need at least one hyperplane");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto kk = static_cast<Eigen::Index>(k);

  GibbsState s;
  s.m.assign(data.size(), 0);
  s.m_k = CountMatrix::Zero(n, kk);
  s.l = CountMatrix::Zero(n, kk);
  s.omega = Eigen::MatrixXd::Zero(n, kk);
  s.alpha = Eigen::MatrixXd::Ones(d, kk);
  s.b_beta = Eigen::VectorXd::Constant(kk, hp.b_beta_init);
  s.l_tilde.assign(k, 0);
  s.p_tilde = Eigen::VectorXd::Zero(kk);
  s.gamma0 = hp.gamma0;
  s.c0 = hp.c0;
  s.r = Eigen::VectorXd::Constant(kk, 1.0 / static_cast<double>(k));
  s.beta = Eigen::MatrixXd::Zero(d, kk);
  // theta_ik ~ Gamma(r_k, e^{x'beta_k}) with beta = 0.
  s.theta.resize(n, kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) s.theta(i, c) = sample_gamma(s.r[c], 1.0, rng);
  }
  return s;
}

namespace gibbs {

void update_counts(GibbsState& state, const Dataset& data, RngStream& rng) {
  const auto kk = static_cast<std::size_t>(state.active());
  std::vector<double> weights(kk);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (data.labels[i] == 0) {
      state.m[i] = 0;
      state.m_k.row(row).setZero();
      continue;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      weights[k] = state.theta(row, static_cast<Eigen::Index>(k));
      total += weights[k];
    }
    state.m[i] = sample_truncated_poisson(std::max(total, kTiny), rng);
    const auto parts = sample_multinomial_partition(state.m[i], weights, rng);
    for (std::size_t k = 0; k < kk; ++k) state.m_k(row, static_cast<Eigen::Index>(k)) = parts[k];
  }
}

void update_omega(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  const Eigen::VectorXd psi = data.features * state.beta.col(c);
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    state.omega(i, c) = sample_polya_gamma(static_cast<double>(state.m_k(i, c)) + state.r[c], psi[i], rng);
  }
}

void update_beta(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  const auto omega = state.omega.col(c);
  Eigen::MatrixXd precision =
      kernels::weighted_gram(data.features, std::span<const double>(omega.data(), omega.size()));
  precision.diagonal() += state.alpha.col(c);
  const Eigen::VectorXd kappa =
      (state.m_k.col(c).cast<double>().array() - state.r[c]).matrix() / 2.0;
  const Eigen::VectorXd shift = data.features.transpose() * kappa;
  try {
    state.beta.col(c) = sample_mvn_from_precision(precision, shift, rng);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (hyperplane " + std::to_string(k) + ")",
                         static_cast<long>(k));
  }
}

void update_theta(GibbsState& state, const Dataset& data, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  const Eigen::VectorXd psi = data.features * state.beta.col(c);
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    const double scale = std::max(sigmoid(psi[i]), kTiny);
    state.theta(i, c) = sample_gamma(state.r[c] + static_cast<double>(state.m_k(i, c)), scale, rng);
  }
}

void update_alpha(GibbsState& state, const IshmHyperparams& hp, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  for (Eigen::Index v = 0; v < state.alpha.rows(); ++v) {
    const double b = state.beta(v, c);
    const double draw = sample_gamma(hp.a_beta + 0.5, scale_from_rate(state.b_beta[c] + 0.5 * b * b), rng);
    state.alpha(v, c) = std::clamp(draw, kPrecisionFloor, kPrecisionCeiling);
  }
}

void update_b_beta(GibbsState& state, const IshmHyperparams& hp, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  const double shape = hp.e0 + hp.a_beta * static_cast<double>(state.alpha.rows());
  state.b_beta[c] = sample_gamma(shape, scale_from_rate(hp.f0 + state.alpha.col(c).sum()), rng);
}

void update_tables(GibbsState& state, std::size_t k, RngStream& rng) {
  const auto c = static_cast<Eigen::Index>(k);
  for (Eigen::Index i = 0; i < state.l.rows(); ++i) {
    state.l(i, c) = sample_crt(state.m_k(i, c), state.r[c], rng);
  }
}

void update_hyperplane(GibbsState& state, const Dataset& data, const IshmHyperparams& hp,
                       std::size_t k, RngStream& rng) {
  update_omega(state, data, k, rng);
  update_beta(state, data, k, rng);
  update_theta(state, data, k, rng);
  update_alpha(state, hp, k, rng);
  update_b_beta(state, hp, k, rng);
  update_tables(state, k, rng);
}

Eigen::VectorXd softplus_totals(const GibbsState& state, const Dataset& data) {
  return kernels::hidden_units(data.features, state.beta).colwise().sum().transpose();
}

void update_gamma0(GibbsState& state, const IshmHyperparams& hp, const Eigen::VectorXd& totals,
                   RngStream& rng) {
  const auto kk = static_cast<double>(state.active());
  std::int64_t tables = 0;
  double log_keep = 0.0;
  for (std::size_t k = 0; k < state.active(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    state.p_tilde[c] = totals[c] / (state.c0 + totals[c]);
    state.l_tilde[k] = sample_crt(state.l.col(c).sum(), state.gamma0 / kk, rng);
    tables += state.l_tilde[k];
    // -ln(1 - p_tilde_k)
    log_keep += std::log1p(totals[c] / state.c0);
  }
  state.gamma0 = sample_gamma(hp.a0 + static_cast<double>(tables),
                              scale_from_rate(hp.b0 + log_keep / kk), rng);
}

void update_r(GibbsState& state, const Eigen::VectorXd& totals, RngStream& rng) {
  const auto kk = static_cast<double>(state.active());
  for (Eigen::Index c = 0; c < state.r.size(); ++c) {
    const double shape = state.gamma0 / kk + static_cast<double>(state.l.col(c).sum());
    state.r[c] = sample_gamma(shape, scale_from_rate(state.c0 + totals[c]), rng);
  }
}

void update_c0(GibbsState& state, const IshmHyperparams& hp, RngStream& rng) {
  state.c0 = sample_gamma(hp.e0 + state.gamma0, scale_from_rate(hp.f0 + state.r.sum()), rng);
}

void update_globals(GibbsState& state, const Dataset& data, const IshmHyperparams& hp,
                    RngStream& rng) {
  if (state.active() == 0) return;
  const Eigen::VectorXd totals = softplus_totals(state, data);
  update_gamma0(state, hp, totals, rng);
  update_r(state, totals, rng);
  update_c0(state, hp, rng);
}

}  // namespace gibbs

void gibbs_step(GibbsState& state, const Dataset& data, const IshmHyperparams& hp, RngStream& rng) {
  if (state.m.size() != data.size() || static_cast<std::size_t>(state.beta.rows()) != data.dim()) {
    throw DimensionError("gibbs_step: state does not match data");
  }
  RngStream counts_rng = rng.split(kCountsStream);
  gibbs::update_counts(state, data, counts_rng);

  const auto kk = static_cast<std::ptrdiff_t>(state.active());
  std::exception_ptr failure;
  std::ptrdiff_t failed_k = kk;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < kk; ++k) {
    try {
      RngStream k_rng = rng.split(kFirstHyperplaneStream + static_cast<std::uint64_t>(k));
      gibbs::update_hyperplane(state, data, hp, static_cast<std::size_t>(k), k_rng);
    } catch (...) {
#pragma omp critical(pbdn_gibbs_failure)
      if (k < failed_k) {
        failed_k = k;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  RngStream globals_rng = rng.split(kGlobalsStream);
  gibbs::update_globals(state, data, hp, globals_rng);
}

double state_log_likelihood(const GibbsState& state, const Dataset& data) {
  const Eigen::VectorXd lambda = kernels::rates(data.features, state.beta, state.r);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += log_likelihood_from_rate(lambda[static_cast<Eigen::Index>(i)], data.labels[i]);
  }
  return total;
}

FitResult run_gibbs(const Dataset& data, const IshmHyperparams& hp, const GibbsConfig& cfg) {
  cfg.validate();
  data.validate();
  if (std::none_of(data.labels.begin(), data.labels.end(), [](int y) { return y == 1; })) {
    throw std::invalid_argument("gibbs: training data needs at least one positive example");
  }
  IshmHyperparams run_hp = hp;
  run_hp.k_max = cfg.k_max;

  const RngStream root(cfg.seed);
  RngStream init_rng = root.split(0);
  GibbsState state = init_gibbs_state(data, run_hp, cfg.k_max, init_rng);

  FitResult result;
  result.initial_log_likelihood = state_log_likelihood(state, data);
  const auto burn = static_cast<std::size_t>(cfg.burn_fraction * static_cast<double>(cfg.iterations));

  double best = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_beta = state.beta;
  Eigen::VectorXd best_r = state.r;
  bool have_best = false;

  for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
    RngStream sweep_rng = root.split(iter);
    gibbs_step(state, data, run_hp, sweep_rng);
    if (iter % cfg.prune_every == 0) state.prune();
    if (state.active() == 0) {
      result.warnings.push_back("all hyperplanes pruned at sweep " + std::to_string(iter));
      best_beta.resize(state.beta.rows(), 0);
      best_r.resize(0);
      have_best = true;
      best = state_log_likelihood(state, data);
      break;
    }

    const bool in_window = iter > burn;
    const bool tracing = cfg.trace != nullptr || cfg.keep_trace;
    if (!in_window && !tracing) continue;
    const double ll = state_log_likelihood(state, data);
    TraceRecord rec{iter, state.active(), ll};
    if (cfg.keep_trace) result.trace.push_back(rec);
    if (cfg.trace) write_trace_line(*cfg.trace, rec, "loglik");
    if (in_window && (!have_best || ll > best)) {
      best = ll;
      best_beta = state.beta;
      best_r = state.r;
      have_best = true;
    }
  }

  result.model.input_dim = data.dim();
  result.model.hyperparams = run_hp;
  for (Eigen::Index c = 0; c < best_r.size(); ++c) {
    result.model.hyperplanes.push_back({best_beta.col(c), best_r[c]});
  }
  result.model.sort_by_weight();
  result.final_log_likelihood = best;
  return result;
}

}  // namespace pbdn
