#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"
#include "pbdn/stack.hpp"

namespace pbdn {

struct EvalReport {
  std::size_t n = 0;
  double error_rate = 0.0;
  /// Mean of ln P(y_i) under the pair-averaged probability, floored at the
  /// smallest normal double.
  double mean_log_likelihood = 0.0;
  double complexity = 0.0;
  std::size_t depth = 0;
  std::vector<std::size_t> layer_widths;
  double wall_time_s = 0.0;
};

/// Error rate and mean log-likelihood of probabilities against 0/1 labels.
/// Probability exactly 0.5 predicts label 0.
EvalReport score_probabilities(const Eigen::VectorXd& prob, const std::vector<int>& labels);

/// Scores the stack at its selected depth on data already in model space.
EvalReport evaluate(const PbdnStack& stack, const Dataset& data);

std::string report_to_json(const EvalReport& report);
/// Human-readable two-column table.
std::string report_table(const EvalReport& report);

}  // namespace pbdn
