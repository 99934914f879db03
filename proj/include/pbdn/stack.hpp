#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"
#include "pbdn/gibbs.hpp"
#include "pbdn/ishm.hpp"
#include "pbdn/map.hpp"

namespace pbdn {

/// How layer t+1's input is assembled from the hidden units.
///   full:        [1, x~(t), x~(t+1)]
///   hidden_only: [1, x~(t+1)]
///   cumulative:  [x(t), x~(t+1)]
enum class ConcatMode { full, hidden_only, cumulative };

enum class Engine { gibbs, map };

enum class Criterion { aic, aic_eps };

const char* to_string(ConcatMode mode);
const char* to_string(Engine engine);
const char* to_string(Criterion criterion);
ConcatMode parse_concat_mode(const std::string& s);
Engine parse_engine(const std::string& s);
Criterion parse_criterion(const std::string& s);

struct CriterionPoint {
  std::size_t depth = 0;
  double value = 0.0;
};

struct PbdnStack {
  std::vector<IshmPair> pairs;
  /// K_1 = V, then K_{t+1} = width of pair t.
  std::vector<std::size_t> layer_widths;
  std::size_t selected_depth = 0;
  std::vector<CriterionPoint> criterion_trace;
  ConcatMode concat = ConcatMode::full;
  IshmHyperparams hyperparams;
  std::optional<Standardization> standardization;

  /// Number of raw covariates V.
  std::size_t covariates() const { return layer_widths.empty() ? 0 : layer_widths.front(); }
  std::size_t depth() const { return pairs.size(); }
  void validate() const;
};

/// Stacked coefficients of a pair: model_pos's hyperplanes then model_neg's.
Eigen::MatrixXd pair_beta(const IshmPair& pair);

/// x(t+1) = [1, x~(t), x~(t+1)] with x~(t+1)_k = softplus(beta_k' x(t)).
Eigen::VectorXd propagate(const IshmPair& pair, const Eigen::VectorXd& x_prev,
                          const Eigen::VectorXd& x_tilde_prev);

/// Inputs x(1), ..., x(depth) for every row of `features` (bias in column 0,
/// already in the stack's standardized space).
std::vector<RowMatrix> layer_inputs(const PbdnStack& stack, const RowMatrix& features,
                                    std::size_t depth);

/// Builds the next layer input from the current input, the previous hidden
/// units, and the new hidden units.
RowMatrix next_layer_input(ConcatMode mode, const RowMatrix& x, const RowMatrix& tilde_prev,
                           const RowMatrix& hidden);

/// ln P(y | x(T)) under model_pos plus ln P(1 - y | x(T)) under model_neg.
double pair_log_likelihood(const IshmPair& pair, const RowMatrix& x, const std::vector<int>& labels);

/// Sum over t <= depth of 2 (K_t + 1) K_{t+1}, plus 2 K_{T+1}, minus twice the
/// pair log-likelihood at layer T.
double aic(const PbdnStack& stack, const Dataset& data, std::size_t depth);

/// As aic, with the per-layer cost replaced by twice the number of entries of
/// each model's coefficient matrix above epsilon times its largest magnitude.
double aic_eps(const PbdnStack& stack, const Dataset& data, std::size_t depth, double epsilon);

/// Parameter cost parts of the two criteria, exposed for testing.
double aic_penalty(const std::vector<std::size_t>& widths, std::size_t depth);
std::size_t thresholded_count(const Eigen::MatrixXd& b, double epsilon);

struct StackConfig {
  Engine engine = Engine::map;
  Criterion criterion = Criterion::aic;
  double epsilon = 0.01;
  std::size_t max_layers = 10;
  /// Train all max_layers pairs; selected_depth is still taken from the
  /// first rise of the criterion.
  bool force_all_layers = false;
  ConcatMode concat = ConcatMode::full;
  std::uint64_t seed = 0;
  /// Engine settings; seed and layer index are overwritten per model.
  GibbsConfig gibbs;
  MapConfig map;

  void validate() const;
};

struct GrowResult {
  PbdnStack stack;
  std::vector<std::string> warnings;
};

/// Greedy layer-wise construction on `data` (bias column first).
GrowResult grow(const Dataset& data, const IshmHyperparams& hp, const StackConfig& cfg);

/// Pair-averaged P(y = 1) at selected_depth for rows already in model space.
Eigen::VectorXd predict_proba(const PbdnStack& stack, const RowMatrix& features);
Eigen::VectorXd predict_proba(const PbdnStack& stack, const RowMatrix& features, std::size_t depth);

/// Raw covariates (length V); applies the stored standardization.
double predict(const PbdnStack& stack, const Eigen::VectorXd& covariates);

/// Label rule: 1 when the probability exceeds 0.5, so a tie gives 0.
inline int predict_label(double prob) { return prob > 0.5 ? 1 : 0; }

/// Hyperplane-equivalent prediction cost of the first selected_depth pairs:
/// sum_t input_dim_t K_{t+1} / (V + 1).
double complexity(const PbdnStack& stack);

}  // namespace pbdn
