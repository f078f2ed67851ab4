#pragma once

#include <stdexcept>
#include <string>

namespace ionbell {

/// Raised when propagation produces non-finite values or breaks a conservation
/// law it is supposed to respect.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ionbell
