#pragma once

#include <stdexcept>
#include <string>

namespace mhdm {

/// Bad input: wrong sizes, nonpositive data where a log/ratio is needed,
/// malformed configuration. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A solver produced a non-finite or domain-violating iterate, or failed to
/// converge where convergence is required. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mhdm
