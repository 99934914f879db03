#include "pbdn/kernels.hpp"

#include <cmath>
#include <vector>

#include "pbdn/error.hpp"
#include "pbdn/ishm.hpp"

namespace pbdn::kernels {

namespace {

void check_inner(const RowMatrix& x, const Eigen::MatrixXd& beta) {
  if (x.cols() != beta.rows()) throw DimensionError("kernel: input width differs from beta rows");
}

double data_loss(double lambda, int y) {
  if (y == 0) return lambda;
  return -std::log(-std::expm1(-std::max(lambda, kRateFloor)));
}

double data_factor(double lambda, int y) {
  if (y == 0) return 1.0;
  return -1.0 / std::expm1(std::max(lambda, kRateFloor));
}

}  // namespace

Eigen::MatrixXd responses(const RowMatrix& x, const Eigen::MatrixXd& beta) {
  check_inner(x, beta);
  const Eigen::Index n = x.rows();
  const Eigen::Index k_count = beta.cols();
  Eigen::MatrixXd psi(n, k_count);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < k_count; ++k) psi(i, k) = x.row(i).dot(beta.col(k).transpose());
  }
  return psi;
}

Eigen::MatrixXd hidden_units(const RowMatrix& x, const Eigen::MatrixXd& beta) {
  check_inner(x, beta);
  const Eigen::Index n = x.rows();
  const Eigen::Index k_count = beta.cols();
  Eigen::MatrixXd h(n, k_count);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      h(i, k) = softplus(x.row(i).dot(beta.col(k).transpose()));
    }
  }
  return h;
}

Eigen::VectorXd rates(const RowMatrix& x, const Eigen::MatrixXd& beta, const Eigen::VectorXd& r) {
  check_inner(x, beta);
  if (r.size() != beta.cols()) throw DimensionError("kernel: weight count differs from beta cols");
  const Eigen::Index n = x.rows();
  Eigen::VectorXd lambda(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < beta.cols(); ++k) {
      acc += r[k] * softplus(x.row(i).dot(beta.col(k).transpose()));
    }
    lambda[i] = acc;
  }
  return lambda;
}

Eigen::MatrixXd weighted_gram(const RowMatrix& x, std::span<const double> w) {
  if (static_cast<Eigen::Index>(w.size()) != x.rows()) {
    throw DimensionError("weighted_gram: weight count differs from rows");
  }
  const Eigen::Index d = x.cols();
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd gram(d, d);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) acc += w[static_cast<std::size_t>(i)] * x(i, a) * x(i, b);
      gram(a, b) = acc;
      gram(b, a) = acc;
    }
  }
  return gram;
}

DataTerm map_data_term(const RowMatrix& x, std::span<const int> y, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& log_r, double scale) {
  check_inner(x, beta);
  const Eigen::Index n = x.rows();
  const Eigen::Index k_count = beta.cols();
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd r = log_r.array().exp();

  Eigen::MatrixXd sp(n, k_count);
  Eigen::MatrixXd sig(n, k_count);
  std::vector<double> factor(static_cast<std::size_t>(n));
  std::vector<double> loss(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double lambda = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double psi = x.row(i).dot(beta.col(k).transpose());
      sp(i, k) = softplus(psi);
      sig(i, k) = sigmoid(psi);
      lambda += r[k] * sp(i, k);
    }
    const int yi = y[static_cast<std::size_t>(i)];
    loss[static_cast<std::size_t>(i)] = data_loss(lambda, yi);
    factor[static_cast<std::size_t>(i)] = scale * data_factor(lambda, yi);
  }

  DataTerm out;
  out.d_beta.resize(d, k_count);
  out.d_log_r.resize(k_count);
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < k_count; ++k) {
    double g_r = 0.0;
    Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = factor[static_cast<std::size_t>(i)] * r[k];
      g_r += f * sp(i, k);
      g_beta += (f * sig(i, k)) * x.row(i).transpose();
    }
    out.d_log_r[k] = g_r;
    out.d_beta.col(k) = g_beta;
  }

  double value = 0.0;
  for (double l : loss) value += l;
  out.value = scale * value;
  return out;
}

namespace serial {

Eigen::MatrixXd responses(const RowMatrix& x, const Eigen::MatrixXd& beta) {
  check_inner(x, beta);
  return x * beta;
}

Eigen::MatrixXd hidden_units(const RowMatrix& x, const Eigen::MatrixXd& beta) {
  check_inner(x, beta);
  return (x * beta).unaryExpr([](double z) { return softplus(z); });
}

Eigen::VectorXd rates(const RowMatrix& x, const Eigen::MatrixXd& beta, const Eigen::VectorXd& r) {
  return hidden_units(x, beta) * r;
}

Eigen::MatrixXd weighted_gram(const RowMatrix& x, std::span<const double> w) {
  if (static_cast<Eigen::Index>(w.size()) != x.rows()) {
    throw DimensionError("weighted_gram: weight count differs from rows");
  }
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    gram.noalias() += w[static_cast<std::size_t>(i)] * xi * xi.transpose();
  }
  return gram;
}

DataTerm map_data_term(const RowMatrix& x, std::span<const int> y, const Eigen::MatrixXd& beta,
                       const Eigen::VectorXd& log_r, double scale) {
  check_inner(x, beta);
  const Eigen::VectorXd r = log_r.array().exp();
  DataTerm out;
  out.d_beta = Eigen::MatrixXd::Zero(x.cols(), beta.cols());
  out.d_log_r = Eigen::VectorXd::Zero(beta.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    const Eigen::VectorXd psi = beta.transpose() * xi;
    const Eigen::VectorXd sp = psi.unaryExpr([](double z) { return softplus(z); });
    const double lambda = r.dot(sp);
    const int yi = y[static_cast<std::size_t>(i)];
    out.value += scale * data_loss(lambda, yi);
    const double f = scale * data_factor(lambda, yi);
    for (Eigen::Index k = 0; k < beta.cols(); ++k) {
      out.d_log_r[k] += f * r[k] * sp[k];
      out.d_beta.col(k) += f * r[k] * sigmoid(psi[k]) * xi;
    }
  }
  return out;
}

}  // namespace serial

}  // namespace pbdn::kernels
