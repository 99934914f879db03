#include "pbdn/map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbdn/error.hpp"
#include "pbdn/kernels.hpp"

namespace pbdn {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kPruneStream = 2;

void check_batch(const MapParams& params, const RowMatrix& x, std::span<const int> y) {
  if (x.rows() == 0) throw std::invalid_argument("map: empty batch");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw DimensionError("map: label count differs from rows");
  }
  if (params.beta.cols() != params.log_r.size()) {
    throw DimensionError("map: beta columns differ from weight count");
  }
}

double prior_value(const MapParams& params, const IshmHyperparams& hp) {
  const double kk = static_cast<double>(params.active());
  double value = 0.0;
  for (Eigen::Index k = 0; k < params.log_r.size(); ++k) {
    value += -(hp.gamma0 / kk) * params.log_r[k] + hp.c0 * std::exp(params.log_r[k]);
  }
  const double two_b = 2.0 * hp.b_beta_init;
  double shrink = 0.0;
  for (Eigen::Index i = 0; i < params.beta.size(); ++i) {
    const double b = params.beta.data()[i];
    shrink += std::log1p(b * b / two_b);
  }
  return value + (hp.a_beta + 0.5) * shrink;
}

void add_prior_gradient(const MapParams& params, const IshmHyperparams& hp, MapGradient& grad) {
  const double kk = static_cast<double>(params.active());
  const double b_beta = hp.b_beta_init;
  for (Eigen::Index k = 0; k < params.log_r.size(); ++k) {
    grad.d_log_r[k] += -hp.gamma0 / kk + hp.c0 * std::exp(params.log_r[k]);
  }
  const double coef = hp.a_beta + 0.5;
  for (Eigen::Index i = 0; i < params.beta.size(); ++i) {
    const double b = params.beta.data()[i];
    grad.d_beta.data()[i] += coef * (b / b_beta) / (1.0 + b * b / (2.0 * b_beta));
  }
}

double batch_scale(std::size_t n_total, const RowMatrix& x) {
  return static_cast<double>(n_total) / static_cast<double>(x.rows());
}

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

IshmModel params_to_model(const MapParams& params, const IshmHyperparams& hp, std::size_t dim) {
  IshmModel model;
  model.input_dim = dim;
  model.hyperparams = hp;
  for (Eigen::Index k = 0; k < params.log_r.size(); ++k) {
    model.hyperplanes.push_back({params.beta.col(k), std::exp(params.log_r[k])});
  }
  model.sort_by_weight();
  return model;
}

/// Cycles through a permutation of the rows, reshuffling at every pass.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, RngStream rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  void next(const Dataset& data, std::size_t m, RowMatrix& x, std::vector<int>& y) {
    const std::size_t size = std::min(m, order_.size());
    x.resize(static_cast<Eigen::Index>(size), data.features.cols());
    y.resize(size);
    for (std::size_t j = 0; j < size; ++j) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      const std::size_t i = order_[pos_++];
      x.row(static_cast<Eigen::Index>(j)) = data.features.row(static_cast<Eigen::Index>(i));
      y[j] = data.labels[i];
    }
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  RngStream rng_;
};

void require_positive(const Dataset& data) {
  if (std::none_of(data.labels.begin(), data.labels.end(), [](int y) { return y == 1; })) {
    throw std::invalid_argument("map: training data needs at least one positive example");
  }
}

void emit(FitResult& result, const MapConfig& cfg, const TraceRecord& rec) {
  if (cfg.keep_trace) result.trace.push_back(rec);
  if (cfg.trace) write_trace_line(*cfg.trace, rec, "objective");
}

}  // namespace

void MapConfig::validate() const {
  if (minibatch_size < 1) throw ParameterDomainError("map: minibatch_size must be positive");
  if (num_batches < 1) throw ParameterDomainError("map: num_batches must be positive");
  if (!(base_lr > 0.0)) throw ParameterDomainError("map: base_lr must be positive");
  if (layer_index < 1) throw ParameterDomainError("map: layer_index must be at least 1");
  if (prune_every < 1) throw ParameterDomainError("map: prune_every must be positive");
  if (k_max < 1) throw ParameterDomainError("map: k_max must be positive");
  if (!(moment_decay_1 > 0.0 && moment_decay_1 < 1.0) ||
      !(moment_decay_2 > 0.0 && moment_decay_2 < 1.0)) {
    throw ParameterDomainError("map: moment decays must be in (0,1)");
  }
  if (!(lr_epsilon > 0.0)) throw ParameterDomainError("map: lr_epsilon must be positive");
  if (!(init_sd >= 0.0)) throw ParameterDomainError("map: init_sd must be non-negative");
}

double map_objective_and_gradient(const MapParams& params, const RowMatrix& x,
                                  std::span<const int> y, std::size_t n_total,
                                  const IshmHyperparams& hp, MapGradient& grad) {
  check_batch(params, x, y);
  kernels::DataTerm term =
      kernels::map_data_term(x, y, params.beta, params.log_r, batch_scale(n_total, x));
  grad.d_beta = std::move(term.d_beta);
  grad.d_log_r = std::move(term.d_log_r);
  add_prior_gradient(params, hp, grad);
  return term.value + prior_value(params, hp);
}

double map_objective(const MapParams& params, const RowMatrix& x, std::span<const int> y,
                     std::size_t n_total, const IshmHyperparams& hp) {
  MapGradient unused;
  return map_objective_and_gradient(params, x, y, n_total, hp, unused);
}

MapGradient map_gradient(const MapParams& params, const RowMatrix& x, std::span<const int> y,
                         std::size_t n_total, const IshmHyperparams& hp) {
  MapGradient grad;
  map_objective_and_gradient(params, x, y, n_total, hp, grad);
  return grad;
}

AdamOptimizer::AdamOptimizer(double lr, double decay_1, double decay_2, double epsilon)
    : lr_(lr), decay_1_(decay_1), decay_2_(decay_2), epsilon_(epsilon) {}

void AdamOptimizer::init(const MapParams& params) {
  m_.d_beta = Eigen::MatrixXd::Zero(params.beta.rows(), params.beta.cols());
  v_.d_beta = m_.d_beta;
  m_.d_log_r = Eigen::VectorXd::Zero(params.log_r.size());
  v_.d_log_r = m_.d_log_r;
}

void AdamOptimizer::step(MapParams& params, const MapGradient& grad) {
  if (t_ == 0) init(params);
  ++t_;
  const double c1 = 1.0 - std::pow(decay_1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(decay_2_, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = decay_1_ * m + (1.0 - decay_1_) * g;
    v = decay_2_ * v + (1.0 - decay_2_) * g.cwiseAbs2();
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
  };
  update(params.beta, grad.d_beta, m_.d_beta, v_.d_beta);
  update(params.log_r, grad.d_log_r, m_.d_log_r, v_.d_log_r);
}

void AdamOptimizer::keep(const std::vector<Eigen::Index>& columns) {
  if (t_ == 0) return;
  m_.d_beta = keep_columns(m_.d_beta, columns);
  v_.d_beta = keep_columns(v_.d_beta, columns);
  m_.d_log_r = keep_entries(m_.d_log_r, columns);
  v_.d_log_r = keep_entries(v_.d_log_r, columns);
}

std::vector<std::int64_t> sample_activation_counts(const MapParams& params, const Dataset& data,
                                                   RngStream& rng) {
  return sample_activation_counts(params, data.features, data.labels, rng);
}

std::vector<std::int64_t> sample_activation_counts(const MapParams& params, const RowMatrix& x,
                                                   std::span<const int> y, RngStream& rng) {
  check_batch(params, x, y);
  const Eigen::MatrixXd h = kernels::hidden_units(x, params.beta);
  const Eigen::VectorXd r = params.log_r.array().exp();
  const auto kk = static_cast<std::size_t>(r.size());
  std::vector<std::int64_t> counts(kk, 0);
  std::vector<double> p(kk);
  std::vector<char> fired(kk);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0) continue;
    const auto row = static_cast<Eigen::Index>(i);
    bool any = false;
    for (std::size_t k = 0; k < kk; ++k) {
      const auto c = static_cast<Eigen::Index>(k);
      p[k] = -std::expm1(-r[c] * h(row, c));
      fired[k] = rng.uniform() < p[k];
      any = any || fired[k];
    }
    if (!any && kk > 0) {
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      std::size_t pick = kk - 1;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        for (std::size_t k = 0; k < kk; ++k) {
          u -= p[k];
          if (u <= 0.0) {
            pick = k;
            break;
          }
        }
      } else {
        pick = std::min(kk - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(kk)));
      }
      fired[pick] = 1;
    }
    for (std::size_t k = 0; k < kk; ++k) counts[k] += fired[k];
  }
  return counts;
}

FitResult run_map(const Dataset& data, const IshmHyperparams& hp, const MapConfig& cfg) {
  cfg.validate();
  hp.validate();
  data.validate();
  require_positive(data);
  IshmHyperparams run_hp = hp;
  run_hp.k_max = cfg.k_max;

  const RngStream root(cfg.seed);
  RngStream init_rng = root.split(kInitStream);
  RngStream prune_rng = root.split(kPruneStream);
  BatchCycler cycler(data.size(), root.split(kShuffleStream));

  const auto d = static_cast<Eigen::Index>(data.dim());
  const auto kk = static_cast<Eigen::Index>(cfg.k_max);
  MapParams params;
  params.beta.resize(d, kk);
  Eigen::VectorXd spread = Eigen::VectorXd::Ones(d);
  if (data.size() > 1) {
    const Eigen::RowVectorXd mean = data.features.colwise().mean();
    for (Eigen::Index v = 1; v < d; ++v) {
      const double sd = std::sqrt((data.features.col(v).array() - mean[v]).square().mean());
      if (sd > 0.0) spread[v] = sd;
    }
  }
  for (Eigen::Index c = 0; c < kk; ++c) {
    for (Eigen::Index v = 1; v < d; ++v) {
      params.beta(v, c) = cfg.init_sd * init_rng.normal() / spread[v];
    }
    const auto j = static_cast<Eigen::Index>(init_rng() % data.size());
    params.beta(0, c) = -data.features.row(j).tail(d - 1).dot(params.beta.col(c).tail(d - 1));
  }
  params.log_r = Eigen::VectorXd::Constant(kk, -std::log(static_cast<double>(cfg.k_max)));

  FitResult result;
  result.initial_log_likelihood = total_log_likelihood(params_to_model(params, run_hp, data.dim()), data);

  AdamOptimizer adam(cfg.learning_rate(), cfg.moment_decay_1, cfg.moment_decay_2, cfg.lr_epsilon);
  const bool tracing = cfg.trace != nullptr || cfg.keep_trace;
  RowMatrix xb;
  std::vector<int> yb;
  MapGradient grad;
  for (std::size_t batch = 1; batch <= cfg.num_batches; ++batch) {
    cycler.next(data, cfg.minibatch_size, xb, yb);
    map_objective_and_gradient(params, xb, yb, data.size(), run_hp, grad);
    adam.step(params, grad);

    if (batch % cfg.prune_every == 0) {
      const bool batch_has_positive = std::find(yb.begin(), yb.end(), 1) != yb.end();
      const auto counts = cfg.prune_scope == PruneScope::batch && batch_has_positive
                              ? sample_activation_counts(params, xb, yb, prune_rng)
                              : sample_activation_counts(params, data, prune_rng);
      std::vector<Eigen::Index> keep;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] > 0) keep.push_back(static_cast<Eigen::Index>(k));
      }
      if (keep.size() < counts.size()) {
        params.beta = keep_columns(params.beta, keep);
        params.log_r = keep_entries(params.log_r, keep);
        adam.keep(keep);
      }
      if (params.active() == 0) {
        result.warnings.push_back("all hyperplanes pruned at batch " + std::to_string(batch));
        break;
      }
    }
    if (tracing) {
      const double value = map_objective(params, data.features, data.labels, data.size(), run_hp);
      emit(result, cfg, {batch, params.active(), value});
    }
  }

  result.model = params_to_model(params, run_hp, data.dim());
  result.final_log_likelihood = total_log_likelihood(result.model, data);
  return result;
}

FitResult run_logistic_map(const Dataset& data, double l2, const MapConfig& cfg) {
  cfg.validate();
  data.validate();
  if (!(l2 >= 0.0)) throw ParameterDomainError("logistic: l2 must be non-negative");

  const RngStream root(cfg.seed);
  BatchCycler cycler(data.size(), root.split(kShuffleStream));
  MapParams params;
  params.beta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.dim()), 1);
  params.log_r = Eigen::VectorXd::Zero(1);

  IshmHyperparams hp = IshmHyperparams::map_defaults();
  hp.k_max = 1;
  FitResult result;
  result.initial_log_likelihood = total_log_likelihood(params_to_model(params, hp, data.dim()), data);

  AdamOptimizer adam(cfg.learning_rate(), cfg.moment_decay_1, cfg.moment_decay_2, cfg.lr_epsilon);
  const bool tracing = cfg.trace != nullptr || cfg.keep_trace;
  auto penalized = [&](const RowMatrix& x, std::span<const int> y, MapGradient& g) {
    kernels::DataTerm term =
        kernels::map_data_term(x, y, params.beta, params.log_r, batch_scale(data.size(), x));
    g.d_beta = std::move(term.d_beta);
    g.d_log_r = Eigen::VectorXd::Zero(1);
    const auto w = params.beta.col(0).tail(params.beta.rows() - 1);
    g.d_beta.col(0).tail(params.beta.rows() - 1) += l2 * w;
    return term.value + 0.5 * l2 * w.squaredNorm();
  };

  RowMatrix xb;
  std::vector<int> yb;
  MapGradient grad;
  for (std::size_t batch = 1; batch <= cfg.num_batches; ++batch) {
    cycler.next(data, cfg.minibatch_size, xb, yb);
    penalized(xb, yb, grad);
    adam.step(params, grad);
    if (tracing) {
      MapGradient unused;
      emit(result, cfg, {batch, 1, penalized(data.features, data.labels, unused)});
    }
  }

  result.model = params_to_model(params, hp, data.dim());
  result.final_log_likelihood = total_log_likelihood(result.model, data);
  return result;
}

}  // namespace pbdn
