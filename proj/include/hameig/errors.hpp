// Error taxonomy shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace hameig {

// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration data: bad block indices, non-tiling pieces,
// dimension mismatches, invalid generators, unreadable config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Evaluation requested outside the time interval an object is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Arguments that are structurally invalid for the routine called, e.g. a
// multi-dimensional spec passed to a scalar-only routine or a non-symmetric
// terminal value.
class InputError : public Error {
 public:
  using Error::Error;
};

// A mathematical precondition of the algorithm does not hold for the data
// (wrong perturbation sign, parameter below the threshold, failed smallness
// condition).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be inverted is singular or numerically rank deficient.
class SingularError : public Error {
 public:
  using Error::Error;
};

// A bisection bracket could not be established or validated.
class BracketError : public Error {
 public:
  using Error::Error;
};

// The integrator ran out of budget, underflowed its step size in a
// non-blow-up regime, or produced values it cannot interpret.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A gain schedule could not be assembled, e.g. a solution escapes inside an
// interval where it must stay finite.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

}  // namespace hameig
