#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "pbdn/ishm.hpp"

namespace pbdn {

/// One line of the training trace: iteration, active hyperplanes, and the
/// training log-likelihood (Gibbs) or full-data objective (MAP).
struct TraceRecord {
  std::size_t iteration = 0;
  std::size_t active = 0;
  double value = 0.0;
};

/// Writes `{"iter":..,"k_active":..,"<key>":..}` followed by a newline.
void write_trace_line(std::ostream& out, const TraceRecord& rec, const char* key);

struct FitResult {
  IshmModel model;
  double initial_log_likelihood = 0.0;
  double final_log_likelihood = 0.0;
  std::vector<TraceRecord> trace;
  std::vector<std::string> warnings;
};

}  // namespace pbdn
