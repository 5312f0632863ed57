#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opgd {

/// Shapes of two operands disagree (rows of X vs width d, n vs label count, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Dataset invariant is violated. `row` and `other_row` locate the
/// offending sample(s); `other_row` is only meaningful for pairwise checks.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::size_t row,
                  std::size_t other_row = npos)
      : std::runtime_error(what), row_(row), other_row_(other_row) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t other_row() const noexcept { return other_row_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t row_;
  std::size_t other_row_;
};

/// Malformed file on load.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver ran out of sweeps.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opgd
