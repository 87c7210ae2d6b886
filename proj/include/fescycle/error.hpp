#pragma once

#include <stdexcept>
#include <string>

namespace fes {

/// Precondition or usage-contract violation by the caller.
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A state invariant broke during integration (non-finite values, lost mass).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string &message) {
  if (!condition) {
    throw ContractError(message);
  }
}

} // namespace fes
