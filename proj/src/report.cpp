#include "pbdn/report.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pbdn/error.hpp"

namespace pbdn {

EvalReport score_probabilities(const Eigen::VectorXd& prob, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(prob.size()) != labels.size()) {
    throw DimensionError("score: probability count differs from label count");
  }
  if (labels.empty()) throw std::invalid_argument("score: empty dataset");
  constexpr double kFloor = std::numeric_limits<double>::min();
  EvalReport r;
  r.n = labels.size();
  std::size_t wrong = 0;
  double ll = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = prob[static_cast<Eigen::Index>(i)];
    if (predict_label(p) != labels[i]) ++wrong;
    ll += std::log(std::max(labels[i] == 1 ? p : 1.0 - p, kFloor));
  }
  r.error_rate = static_cast<double>(wrong) / static_cast<double>(r.n);
  r.mean_log_likelihood = ll / static_cast<double>(r.n);
  return r;
}

EvalReport evaluate(const PbdnStack& stack, const Dataset& data) {
  EvalReport r = score_probabilities(predict_proba(stack, data.features), data.labels);
  r.complexity = complexity(stack);
  r.depth = stack.selected_depth;
  r.layer_widths.assign(stack.layer_widths.begin(),
                        stack.layer_widths.begin() + static_cast<std::ptrdiff_t>(r.depth + 1));
  return r;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j{{"n", report.n},
                   {"error_rate", report.error_rate},
                   {"accuracy", 1.0 - report.error_rate},
                   {"mean_log_likelihood", report.mean_log_likelihood},
                   {"complexity", report.complexity},
                   {"depth", report.depth},
                   {"layer_widths", report.layer_widths},
                   {"wall_time_s", report.wall_time_s}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "examples             " << report.n << "\n"
      << "error rate           " << report.error_rate << "\n"
      << "mean log-likelihood  " << report.mean_log_likelihood << "\n"
      << "complexity           " << report.complexity << "\n"
      << "depth                " << report.depth << "\n"
      << "layer widths        ";
  for (auto w : report.layer_widths) out << ' ' << w;
  out << "\nwall time (s)        " << report.wall_time_s << "\n";
  return out.str();
}

}  // namespace pbdn
