#pragma once

#include <stdexcept>
#include <string>

namespace popsim {

// Bad configuration: out-of-range parameters, inconsistent solver settings,
// malformed input files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while running the numerics: non-finite positions, violated
// stability bounds, an LP that will not converge. The CLI maps this to
// exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace popsim
