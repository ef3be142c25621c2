#pragma once

#include <stdexcept>
#include <string>

namespace otbridge {

/// Invalid problem specification or configuration input. Maps to CLI exit code 2.
class SpecError : public std::invalid_argument {
 public:
  explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure at runtime (particle blow-up, singular systems,
/// iteration caps in inner solvers). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace otbridge
