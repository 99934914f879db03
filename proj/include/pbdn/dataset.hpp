#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pbdn/random.hpp"

namespace pbdn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-column affine standardization of the non-bias columns.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
  /// Columns whose spread was zero; they are passed through unchanged.
  std::vector<bool> constant;
};

/// Binary classification data. Column 0 of `features` is the constant bias
/// term, so `dim()` counts it (D = V + 1).
struct Dataset {
  RowMatrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::optional<Standardization> standardization;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  /// Number of covariates excluding the bias.
  std::size_t covariates() const { return dim() == 0 ? 0 : dim() - 1; }
  auto row(std::size_t i) const { return features.row(static_cast<Eigen::Index>(i)); }

  /// Throws if the bias column, label domain, or finiteness invariant fails.
  void validate() const;
};

/// Builds a Dataset from raw covariates (N x V, no bias) and 0/1 labels.
Dataset make_dataset(const RowMatrix& covariates, std::vector<int> labels);

/// Delimited text. `delimiter` of ' ' splits on any run of blanks/tabs.
/// A first row that does not parse as numbers is taken as a header.
Dataset load_dense(const std::string& path, std::size_t label_column = 0, char delimiter = ',');
Dataset parse_dense(const std::string& text, std::size_t label_column = 0, char delimiter = ',');

/// "label idx:val idx:val ..." with 1-based strictly increasing indices.
Dataset load_sparse(const std::string& path, std::optional<std::size_t> dim_hint = std::nullopt);
Dataset parse_sparse(const std::string& text, std::optional<std::size_t> dim_hint = std::nullopt);

/// Writes "label,x1,...,xV" rows with shortest round-trip decimal reals.
void save_dense(const std::string& path, const Dataset& data);
std::string format_dense(const Dataset& data);

Dataset make_two_spirals(std::size_t n_per_class, double noise_sd, double turns, RngStream& rng);

/// Two isotropic Gaussian classes in 2-D centred at (-separation/2, 0) and
/// (+separation/2, 0).
Dataset make_gaussian_blobs(std::size_t n_per_class, double separation, double sd,
                            RngStream& rng);

Dataset standardize(const Dataset& data);
Dataset apply_standardization(const Dataset& data, const Standardization& params);
/// Maps a raw covariate vector (no bias) into the standardized space.
Eigen::VectorXd standardize_point(const Eigen::VectorXd& covariates, const Standardization& params);

/// Stride partition: rows i-1, i-1+s, ... form the training set (1-based i).
std::pair<Dataset, Dataset> partition(const Dataset& data, std::size_t fold_index,
                                      std::size_t stride);

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows);

/// Copy of `data` with labels y* = 1 - y.
Dataset flip_labels(const Dataset& data);

}  // namespace pbdn
