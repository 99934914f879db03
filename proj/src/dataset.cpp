#include "pbdn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

#include "pbdn/error.hpp"

namespace pbdn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_real(std::string_view token, double& out) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  if (delimiter == ' ') {
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(" \t\r", pos);
      if (start == std::string_view::npos) break;
      auto end = line.find_first_of(" \t\r", start);
      if (end == std::string_view::npos) end = line.size();
      out.push_back(line.substr(start, end - start));
      pos = end;
    }
    return out;
  }
  std::size_t pos = 0;
  for (;;) {
    const auto end = line.find(delimiter, pos);
    out.push_back(trim(line.substr(pos, end == std::string_view::npos ? end : end - pos)));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Maps raw labels onto {0,1}; accepts {0,1} or {-1,+1} encodings.
std::vector<int> map_labels(const std::vector<double>& raw) {
  const std::set<double> distinct(raw.begin(), raw.end());
  const bool zero_one = std::all_of(distinct.begin(), distinct.end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
  const bool plus_minus = std::all_of(distinct.begin(), distinct.end(),
                                      [](double v) { return v == -1.0 || v == 1.0; });
  if (!zero_one && !plus_minus) {
    throw LabelDomainError("labels must be {0,1} or {-1,+1}");
  }
  std::vector<int> labels(raw.size());
  std::transform(raw.begin(), raw.end(), labels.begin(), [](double v) { return v > 0.0 ? 1 : 0; });
  return labels;
}

void write_real(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DimensionError("dataset: feature rows and labels differ in length");
  }
  if (features.rows() > 0 && features.cols() == 0) {
    throw DimensionError("dataset: missing bias column");
  }
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    if (features(i, 0) != 1.0) throw DimensionError("dataset: bias column must be 1");
  }
  if (!features.allFinite()) throw std::domain_error("dataset: non-finite feature value");
  for (int y : labels) {
    if (y != 0 && y != 1) throw LabelDomainError("dataset: labels must be 0 or 1");
  }
}

Dataset make_dataset(const RowMatrix& covariates, std::vector<int> labels) {
  if (static_cast<std::size_t>(covariates.rows()) != labels.size()) {
    throw DimensionError("make_dataset: row count differs from label count");
  }
  Dataset data;
  data.features.resize(covariates.rows(), covariates.cols() + 1);
  data.features.col(0).setOnes();
  data.features.rightCols(covariates.cols()) = covariates;
  data.labels = std::move(labels);
  data.validate();
  return data;
}

Dataset parse_dense(const std::string& text, std::size_t label_column, char delimiter) {
  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels;
  std::vector<std::string> names;
  std::size_t width = 0;
  std::size_t line_no = 0;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tokens = split(line, delimiter);
    if (width == 0) {
      width = tokens.size();
      if (label_column >= width) throw ParseError("label column out of range", line_no);
    } else if (tokens.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(tokens.size()),
                       line_no);
    }
    std::vector<double> values(tokens.size());
    bool numeric = true;
    for (std::size_t j = 0; j < tokens.size(); ++j) numeric &= parse_real(tokens[j], values[j]);
    if (!numeric) {
      if (rows.empty() && names.empty()) {
        for (std::size_t j = 0; j < tokens.size(); ++j) {
          if (j != label_column) names.emplace_back(tokens[j]);
        }
        continue;
      }
      throw ParseError("non-numeric field", line_no);
    }
    raw_labels.push_back(values[label_column]);
    values.erase(values.begin() + static_cast<std::ptrdiff_t>(label_column));
    rows.push_back(std::move(values));
  }
  if (width == 0) throw ParseError("no data rows", line_no);

  RowMatrix covariates(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) {
      covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  Dataset data = make_dataset(covariates, map_labels(raw_labels));
  data.feature_names = std::move(names);
  return data;
}

Dataset load_dense(const std::string& path, std::size_t label_column, char delimiter) {
  return parse_dense(read_file(path), label_column, delimiter);
}

Dataset parse_sparse(const std::string& text, std::optional<std::size_t> dim_hint) {
  struct Entry {
    std::size_t index;
    double value;
  };
  std::vector<std::vector<Entry>> rows;
  std::vector<double> raw_labels;
  std::size_t max_index = 0;
  std::size_t line_no = 0;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto tokens = split(content, ' ');
    double label = 0.0;
    if (!parse_real(tokens[0], label)) throw ParseError("bad label", line_no);
    std::vector<Entry> entries;
    std::size_t previous = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) throw ParseError("expected idx:val", line_no);
      const auto idx_text = tokens[t].substr(0, colon);
      std::size_t index = 0;
      const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
      if (ec != std::errc() || ptr != idx_text.data() + idx_text.size()) {
        throw ParseError("bad index", line_no);
      }
      if (index == 0) throw ParseError("indices are 1-based", line_no);
      if (index <= previous) throw ParseError("indices must be strictly increasing", line_no);
      if (dim_hint && index > *dim_hint) throw ParseError("index exceeds dimension", line_no);
      double value = 0.0;
      if (!parse_real(tokens[t].substr(colon + 1), value)) throw ParseError("bad value", line_no);
      entries.push_back({index, value});
      previous = index;
      max_index = std::max(max_index, index);
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(entries));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no);

  const std::size_t v = dim_hint.value_or(max_index);
  RowMatrix covariates = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                         static_cast<Eigen::Index>(v));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& e : rows[i]) {
      covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.index - 1)) = e.value;
    }
  }
  return make_dataset(covariates, map_labels(raw_labels));
}

Dataset load_sparse(const std::string& path, std::optional<std::size_t> dim_hint) {
  return parse_sparse(read_file(path), dim_hint);
}

std::string format_dense(const Dataset& data) {
  std::string out;
  if (!data.feature_names.empty()) {
    out += "label";
    for (const auto& name : data.feature_names) out += "," + name;
    out += '\n';
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += data.labels[i] ? '1' : '0';
    for (Eigen::Index j = 1; j < data.features.cols(); ++j) {
      out += ',';
      write_real(out, data.features(static_cast<Eigen::Index>(i), j));
    }
    out += '\n';
  }
  return out;
}

void save_dense(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << format_dense(data);
}

Dataset make_two_spirals(std::size_t n_per_class, double noise_sd, double turns, RngStream& rng) {
  const double t_min = std::numbers::pi / 2.0;
  const double t_max = t_min + 2.0 * std::numbers::pi * turns;
  RowMatrix covariates(static_cast<Eigen::Index>(2 * n_per_class), 2);
  std::vector<int> labels(2 * n_per_class);
  for (std::size_t j = 0; j < n_per_class; ++j) {
    const double t = t_min + (t_max - t_min) * rng.uniform();
    const double x = t * std::cos(t) / t_max;
    const double y = t * std::sin(t) / t_max;
    const auto r0 = static_cast<Eigen::Index>(2 * j);
    covariates(r0, 0) = x + noise_sd * rng.normal();
    covariates(r0, 1) = y + noise_sd * rng.normal();
    covariates(r0 + 1, 0) = -x + noise_sd * rng.normal();
    covariates(r0 + 1, 1) = -y + noise_sd * rng.normal();
    labels[2 * j] = 0;
    labels[2 * j + 1] = 1;
  }
  if (noise_sd == 0.0) {
    // Noise draws are still consumed above so the sequence does not depend on
    // noise_sd; exact negation is restored here.
    for (std::size_t j = 0; j < n_per_class; ++j) {
      const auto r0 = static_cast<Eigen::Index>(2 * j);
      covariates.row(r0 + 1) = -covariates.row(r0);
    }
  }
  return make_dataset(covariates, std::move(labels));
}

Dataset make_gaussian_blobs(std::size_t n_per_class, double separation, double sd,
                            RngStream& rng) {
  RowMatrix covariates(static_cast<Eigen::Index>(2 * n_per_class), 2);
  std::vector<int> labels(2 * n_per_class);
  for (std::size_t j = 0; j < 2 * n_per_class; ++j) {
    const int y = static_cast<int>(j % 2);
    const auto r = static_cast<Eigen::Index>(j);
    covariates(r, 0) = (y ? 0.5 : -0.5) * separation + sd * rng.normal();
    covariates(r, 1) = sd * rng.normal();
    labels[j] = y;
  }
  return make_dataset(covariates, std::move(labels));
}

Dataset standardize(const Dataset& data) {
  if (data.size() < 2) throw std::invalid_argument("standardize: need at least two rows");
  Standardization params;
  const auto n = static_cast<double>(data.size());
  for (Eigen::Index j = 1; j < data.features.cols(); ++j) {
    const auto col = data.features.col(j);
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    params.mean.push_back(constant ? 0.0 : mean);
    params.stddev.push_back(constant ? 1.0 : sd);
    params.constant.push_back(constant);
  }
  return apply_standardization(data, params);
}

Dataset apply_standardization(const Dataset& data, const Standardization& params) {
  if (params.mean.size() != data.covariates()) {
    throw DimensionError("standardization parameters do not match dataset width");
  }
  Dataset out = data;
  for (std::size_t j = 0; j < params.mean.size(); ++j) {
    auto col = out.features.col(static_cast<Eigen::Index>(j + 1));
    col = (col.array() - params.mean[j]) / params.stddev[j];
  }
  out.standardization = params;
  return out;
}

Eigen::VectorXd standardize_point(const Eigen::VectorXd& covariates, const Standardization& params) {
  if (static_cast<std::size_t>(covariates.size()) != params.mean.size()) {
    throw DimensionError("standardize_point: width mismatch");
  }
  Eigen::VectorXd out(covariates.size());
  for (Eigen::Index j = 0; j < covariates.size(); ++j) {
    out[j] = (covariates[j] - params.mean[static_cast<std::size_t>(j)]) /
             params.stddev[static_cast<std::size_t>(j)];
  }
  return out;
}

Dataset select_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = data.row(rows[r]);
    out.labels.push_back(data.labels[rows[r]]);
  }
  out.feature_names = data.feature_names;
  out.standardization = data.standardization;
  return out;
}

std::pair<Dataset, Dataset> partition(const Dataset& data, std::size_t fold_index,
                                      std::size_t stride) {
  const std::size_t n = data.size();
  if (fold_index < 1 || fold_index > stride || stride > n) {
    throw PartitionError("partition: require 1 <= i <= s <= N");
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t r = 0; r < n; ++r) {
    ((r >= fold_index - 1 && (r - (fold_index - 1)) % stride == 0) ? train : test).push_back(r);
  }
  if (train.empty() || test.empty()) throw PartitionError("partition: empty train or test set");
  return {select_rows(data, train), select_rows(data, test)};
}

Dataset flip_labels(const Dataset& data) {
  Dataset out = data;
  for (int& y : out.labels) y = 1 - y;
  return out;
}

}  // namespace pbdn
