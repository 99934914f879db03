#pragma once

#include <string>

#include "pbdn/stack.hpp"

namespace pbdn {

/// Format tag written into every model file.
inline constexpr const char* kStackFormat = "pbdn-stack";
inline constexpr int kStackVersion = 1;

/// JSON document with hyperparameters, per-layer pairs (weights and
/// row-major coefficient arrays with their dimensions), layer widths, the
/// selected depth and the criterion trace. Reals use shortest round-trip
/// decimal form; non-finite criterion values are written as null.
std::string stack_to_json(const PbdnStack& stack);
PbdnStack stack_from_json(const std::string& text);

void save_stack(const std::string& path, const PbdnStack& stack);
PbdnStack load_stack(const std::string& path);

}  // namespace pbdn
