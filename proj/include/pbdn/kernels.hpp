#pragma once

#include <span>

#include <Eigen/Dense>

#include "pbdn/dataset.hpp"

// Data-parallel inner loops shared by the engines and the stack.
//
// The default namespace holds the OpenMP kernels. Every output element is
// reduced by one thread in a fixed order, so results are bitwise identical
// for any thread count. `kernels::serial` keeps straightforward single-thread
// reference versions (different loop order, so they agree to rounding, not
// bitwise); tests and the benchmark compare the two.

namespace pbdn::kernels {

/// N x K matrix of inner products x_i' beta_k.
Eigen::MatrixXd responses(const RowMatrix& x, const Eigen::MatrixXd& beta);

/// N x K matrix of softplus(x_i' beta_k).
Eigen::MatrixXd hidden_units(const RowMatrix& x, const Eigen::MatrixXd& beta);

/// Per-row rate sum_k r_k softplus(x_i' beta_k).
Eigen::VectorXd rates(const RowMatrix& x, const Eigen::MatrixXd& beta, const Eigen::VectorXd& r);

/// sum_i w_i x_i x_i' (D x D, symmetric).
Eigen::MatrixXd weighted_gram(const RowMatrix& x, std::span<const double> w);

/// Data part of the MAP objective and its gradient over a batch:
///   scale * sum_i [ -y_i ln(1 - e^{-lambda_i}) + (1 - y_i) lambda_i ]
/// with lambda_i = sum_k e^{log_r_k} softplus(x_i' beta_k), clamped below at 1e-12.
struct DataTerm {
  double value = 0.0;
  Eigen::MatrixXd d_beta;   // D x K
  Eigen::VectorXd d_log_r;  // K
};

DataTerm map_data_term(const RowMatrix& x, std::span<const int> y, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& log_r, double scale);

/// Smallest rate used in the y = 1 log term.
inline constexpr double kRateFloor = 1e-12;

namespace serial {

Eigen::MatrixXd responses(const RowMatrix& x, const Eigen::MatrixXd& beta);
Eigen::MatrixXd hidden_units(const RowMatrix& x, const Eigen::MatrixXd& beta);
Eigen::VectorXd rates(const RowMatrix& x, const Eigen::MatrixXd& beta, const Eigen::VectorXd& r);
Eigen::MatrixXd weighted_gram(const RowMatrix& x, std::span<const double> w);
DataTerm map_data_term(const RowMatrix& x, std::span<const int> y, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& log_r, double scale);

}  // namespace serial

}  // namespace pbdn::kernels
