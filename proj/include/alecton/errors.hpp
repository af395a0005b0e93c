#pragma once

#include <stdexcept>
#include <string>

namespace alecton {

// Shape mismatch between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Matrix numerically singular / not full rank where full rank is required.
struct RankDeficiencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid scalar parameter (out of range, degenerate gap, bad rate, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent run configuration (flag combinations, sampler/rank clashes).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Iteration produced a non-finite or absurdly large value.
struct DivergenceError : std::runtime_error {
  std::size_t step;
  DivergenceError(const std::string& what, std::size_t step_index)
      : std::runtime_error(what), step(step_index) {}
};

// Iterative numeric routine failed to converge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file.
struct ParseError : std::runtime_error {
  std::size_t line;
  ParseError(const std::string& what, std::size_t line_number)
      : std::runtime_error(what), line(line_number) {}
};

}  // namespace alecton
