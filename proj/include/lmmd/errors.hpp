#pragma once

#include <stdexcept>
#include <string>

namespace lmmd {

/// Argument outside the mathematical domain of an operation (bad step count,
/// lattice index not in the lattice, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inputs are individually valid but inconsistent with each other.
class precondition_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative numerical procedure did not reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lmmd
