#include "pbdn/stack.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pbdn/error.hpp"
#include "pbdn/kernels.hpp"

namespace pbdn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

RowMatrix drop_bias(const RowMatrix& features) {
  return features.rightCols(features.cols() - 1);
}

double model_log_likelihood(const IshmModel& model, const RowMatrix& x, const std::vector<int>& y,
                            bool flip) {
  const Eigen::VectorXd lambda = kernels::rates(x, model.beta_matrix(), model.weights());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int yi = flip ? 1 - y[i] : y[i];
    total += log_likelihood_from_rate(lambda[static_cast<Eigen::Index>(i)], yi);
  }
  return total;
}

void check_depth(const PbdnStack& stack, std::size_t depth) {
  if (depth < 1 || depth > stack.pairs.size()) {
    throw std::out_of_range("stack: depth " + std::to_string(depth) + " outside 1.." +
                            std::to_string(stack.pairs.size()));
  }
}

FitResult train_model(const Dataset& data, const IshmHyperparams& hp, const StackConfig& cfg,
                      std::size_t layer, std::uint64_t seed) {
  if (cfg.engine == Engine::gibbs) {
    GibbsConfig g = cfg.gibbs;
    g.seed = seed;
    return run_gibbs(data, hp, g);
  }
  MapConfig m = cfg.map;
  m.seed = seed;
  m.layer_index = layer;
  return run_map(data, hp, m);
}

}  // namespace

const char* to_string(ConcatMode mode) {
  switch (mode) {
    case ConcatMode::full: return "full";
    case ConcatMode::hidden_only: return "hidden-only";
    case ConcatMode::cumulative: return "cumulative";
  }
  return "full";
}

const char* to_string(Engine engine) { return engine == Engine::gibbs ? "gibbs" : "sgd"; }

const char* to_string(Criterion criterion) {
  return criterion == Criterion::aic ? "aic" : "aic-eps";
}

ConcatMode parse_concat_mode(const std::string& s) {
  if (s == "full") return ConcatMode::full;
  if (s == "hidden-only") return ConcatMode::hidden_only;
  if (s == "cumulative") return ConcatMode::cumulative;
  throw std::invalid_argument("unknown concat mode: " + s);
}

Engine parse_engine(const std::string& s) {
  if (s == "gibbs") return Engine::gibbs;
  if (s == "sgd" || s == "map") return Engine::map;
  throw std::invalid_argument("unknown inference engine: " + s);
}

Criterion parse_criterion(const std::string& s) {
  if (s == "aic") return Criterion::aic;
  if (s == "aic-eps") return Criterion::aic_eps;
  throw std::invalid_argument("unknown criterion: " + s);
}

void PbdnStack::validate() const {
  if (layer_widths.size() != pairs.size() + 1) {
    throw DimensionError("stack: layer_widths must have one more entry than pairs");
  }
  if (selected_depth < 1 || selected_depth > pairs.size()) {
    throw DimensionError("stack: selected_depth out of range");
  }
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const IshmPair& p = pairs[t];
    if (p.model_pos.input_dim != p.model_neg.input_dim) {
      throw DimensionError("stack: pair models differ in input dimension");
    }
    if (p.width() != layer_widths[t + 1]) throw DimensionError("stack: layer width mismatch");
    p.model_pos.validate();
    p.model_neg.validate();
  }
}

Eigen::MatrixXd pair_beta(const IshmPair& pair) {
  const Eigen::MatrixXd pos = pair.model_pos.beta_matrix();
  const Eigen::MatrixXd neg = pair.model_neg.beta_matrix();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(pair.input_dim()), pos.cols() + neg.cols());
  out << pos, neg;
  return out;
}

Eigen::VectorXd propagate(const IshmPair& pair, const Eigen::VectorXd& x_prev,
                          const Eigen::VectorXd& x_tilde_prev) {
  if (static_cast<std::size_t>(x_prev.size()) != pair.input_dim()) {
    throw DimensionError("propagate: input width differs from pair input");
  }
  const Eigen::VectorXd hidden =
      (pair_beta(pair).transpose() * x_prev).unaryExpr([](double z) { return softplus(z); });
  Eigen::VectorXd out(1 + x_tilde_prev.size() + hidden.size());
  out << 1.0, x_tilde_prev, hidden;
  return out;
}

RowMatrix next_layer_input(ConcatMode mode, const RowMatrix& x, const RowMatrix& tilde_prev,
                           const RowMatrix& hidden) {
  const Eigen::Index n = x.rows();
  RowMatrix out;
  switch (mode) {
    case ConcatMode::full:
      out.resize(n, 1 + tilde_prev.cols() + hidden.cols());
      out << Eigen::VectorXd::Ones(n), tilde_prev, hidden;
      break;
    case ConcatMode::hidden_only:
      out.resize(n, 1 + hidden.cols());
      out << Eigen::VectorXd::Ones(n), hidden;
      break;
    case ConcatMode::cumulative:
      out.resize(n, x.cols() + hidden.cols());
      out << x, hidden;
      break;
  }
  return out;
}

std::vector<RowMatrix> layer_inputs(const PbdnStack& stack, const RowMatrix& features,
                                    std::size_t depth) {
  if (depth > stack.pairs.size()) throw std::out_of_range("layer_inputs: depth exceeds stack");
  if (static_cast<std::size_t>(features.cols()) != stack.covariates() + 1) {
    throw DimensionError("layer_inputs: feature width differs from stack input");
  }
  std::vector<RowMatrix> out;
  out.push_back(features);
  RowMatrix tilde = drop_bias(features);
  for (std::size_t t = 1; t < depth; ++t) {
    const IshmPair& pair = stack.pairs[t - 1];
    const RowMatrix hidden = kernels::hidden_units(out.back(), pair_beta(pair));
    out.push_back(next_layer_input(stack.concat, out.back(), tilde, hidden));
    tilde = hidden;
  }
  return out;
}

double pair_log_likelihood(const IshmPair& pair, const RowMatrix& x, const std::vector<int>& labels) {
  return model_log_likelihood(pair.model_pos, x, labels, false) +
         model_log_likelihood(pair.model_neg, x, labels, true);
}

double aic_penalty(const std::vector<std::size_t>& widths, std::size_t depth) {
  if (widths.size() < depth + 1) throw std::out_of_range("aic_penalty: widths too short");
  double cost = 0.0;
  for (std::size_t t = 1; t <= depth; ++t) {
    cost += 2.0 * static_cast<double>((widths[t - 1] + 1) * widths[t]);
  }
  return cost + 2.0 * static_cast<double>(widths[depth]);
}

std::size_t thresholded_count(const Eigen::MatrixXd& b, double epsilon) {
  if (b.size() == 0) return 0;
  const double cut = epsilon * b.cwiseAbs().maxCoeff();
  return static_cast<std::size_t>((b.array().abs() > cut).count());
}

double aic(const PbdnStack& stack, const Dataset& data, std::size_t depth) {
  check_depth(stack, depth);
  const auto inputs = layer_inputs(stack, data.features, depth);
  const double ll = pair_log_likelihood(stack.pairs[depth - 1], inputs.back(), data.labels);
  return aic_penalty(stack.layer_widths, depth) - 2.0 * ll;
}

double aic_eps(const PbdnStack& stack, const Dataset& data, std::size_t depth, double epsilon) {
  check_depth(stack, depth);
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ParameterDomainError("aic_eps: epsilon must be in (0,1]");
  double cost = 0.0;
  for (std::size_t t = 0; t < depth; ++t) {
    const IshmPair& p = stack.pairs[t];
    cost += 2.0 * static_cast<double>(thresholded_count(p.model_pos.beta_matrix(), epsilon) +
                                      thresholded_count(p.model_neg.beta_matrix(), epsilon));
  }
  cost += 2.0 * static_cast<double>(stack.layer_widths[depth]);
  const auto inputs = layer_inputs(stack, data.features, depth);
  const double ll = pair_log_likelihood(stack.pairs[depth - 1], inputs.back(), data.labels);
  return cost - 2.0 * ll;
}

void StackConfig::validate() const {
  if (max_layers < 1) throw ParameterDomainError("grow: max_layers must be at least 1");
  if (criterion == Criterion::aic_eps && !(epsilon > 0.0 && epsilon < 1.0)) {
    throw ParameterDomainError("grow: epsilon must be in (0,1)");
  }
  if (engine == Engine::gibbs) {
    gibbs.validate();
  } else {
    map.validate();
  }
}

GrowResult grow(const Dataset& data, const IshmHyperparams& hp, const StackConfig& cfg) {
  cfg.validate();
  hp.validate();
  data.validate();

  GrowResult result;
  PbdnStack& stack = result.stack;
  stack.concat = cfg.concat;
  stack.hyperparams = hp;
  stack.standardization = data.standardization;
  stack.layer_widths.push_back(data.covariates());

  const RngStream root(cfg.seed);
  const Dataset flipped = flip_labels(data);
  Dataset layer_pos = data;
  Dataset layer_neg = flipped;
  RowMatrix tilde = drop_bias(data.features);
  double previous = kInf;
  bool stopped = false;

  for (std::size_t t = 1; t <= cfg.max_layers; ++t) {
    RngStream layer_rng = root.split(t);
    const std::uint64_t seed_pos = layer_rng.split(0)();
    const std::uint64_t seed_neg = layer_rng.split(1)();

    IshmPair pair;
    pair.layer_index = t;
    FitResult pos = train_model(layer_pos, hp, cfg, t, seed_pos);
    FitResult neg = train_model(layer_neg, hp, cfg, t, seed_neg);
    for (auto& w : pos.warnings) result.warnings.push_back("layer " + std::to_string(t) + " pos: " + w);
    for (auto& w : neg.warnings) result.warnings.push_back("layer " + std::to_string(t) + " neg: " + w);
    pair.model_pos = std::move(pos.model);
    pair.model_neg = std::move(neg.model);
    pair.model_neg.label_flipped = true;

    if (pair.width() == 0) {
      result.warnings.push_back("layer " + std::to_string(t) + ": both models have no active hyperplanes");
      if (t == 1) throw NumericalError("grow: first layer has no active hyperplanes");
      break;
    }
    stack.pairs.push_back(std::move(pair));
    stack.layer_widths.push_back(stack.pairs.back().width());

    const double ll = pair_log_likelihood(stack.pairs.back(), layer_pos.features, data.labels);
    double value = 0.0;
    if (cfg.criterion == Criterion::aic) {
      value = aic_penalty(stack.layer_widths, t) - 2.0 * ll;
    } else {
      value = aic_eps(stack, data, t, cfg.epsilon);
    }
    stack.criterion_trace.push_back({t, value});

    if (!stopped) {
      if (value < previous) {
        stack.selected_depth = t;
        previous = value;
      } else {
        stopped = true;
      }
    }
    if (stopped && !cfg.force_all_layers) break;
    if (t == cfg.max_layers) break;

    const RowMatrix hidden = kernels::hidden_units(layer_pos.features, pair_beta(stack.pairs.back()));
    layer_pos.features = next_layer_input(cfg.concat, layer_pos.features, tilde, hidden);
    layer_neg.features = layer_pos.features;
    layer_pos.feature_names.clear();
    layer_neg.feature_names.clear();
    tilde = hidden;
  }
  if (stack.selected_depth == 0) stack.selected_depth = 1;
  return result;
}

Eigen::VectorXd predict_proba(const PbdnStack& stack, const RowMatrix& features, std::size_t depth) {
  check_depth(stack, depth);
  const auto inputs = layer_inputs(stack, features, depth);
  const IshmPair& pair = stack.pairs[depth - 1];
  const RowMatrix& x = inputs.back();
  const Eigen::VectorXd lp = kernels::rates(x, pair.model_pos.beta_matrix(), pair.model_pos.weights());
  const Eigen::VectorXd ln = kernels::rates(x, pair.model_neg.beta_matrix(), pair.model_neg.weights());
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = 0.5 * (prob_from_rate(lp[i]) + 1.0 - prob_from_rate(ln[i]));
  }
  return out;
}

Eigen::VectorXd predict_proba(const PbdnStack& stack, const RowMatrix& features) {
  return predict_proba(stack, features, stack.selected_depth);
}

double predict(const PbdnStack& stack, const Eigen::VectorXd& covariates) {
  if (static_cast<std::size_t>(covariates.size()) != stack.covariates()) {
    throw DimensionError("predict: covariate count differs from stack input");
  }
  const Eigen::VectorXd z =
      stack.standardization ? standardize_point(covariates, *stack.standardization) : covariates;
  RowMatrix row(1, z.size() + 1);
  row(0, 0) = 1.0;
  row.rightCols(z.size()) = z.transpose();
  return predict_proba(stack, row)[0];
}

double complexity(const PbdnStack& stack) {
  const double base = static_cast<double>(stack.covariates() + 1);
  double total = 0.0;
  for (std::size_t t = 0; t < stack.selected_depth && t < stack.pairs.size(); ++t) {
    total += static_cast<double>(stack.pairs[t].input_dim() * stack.pairs[t].width()) / base;
  }
  return total;
}

}  // namespace pbdn
