#pragma once

#include <stdexcept>
#include <string>

namespace pmesh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed topology or scenario text. The message carries line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A structural invariant of a topology (or other domain object) does not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// No light path exists between the requested ports under the current constraints.
class NoRoute : public Error {
 public:
  using Error::Error;
};

/// The switch synthesizer ran out of iterations before reaching zero conflicts.
class Unsolved : public Error {
 public:
  using Error::Error;
};

/// Per-output multicast paths cannot be merged into a valid splitting tree.
class TreeConflict : public Error {
 public:
  using Error::Error;
};

/// Power keeps recirculating in the simulated mesh.
class LitCycle : public Error {
 public:
  using Error::Error;
};

/// A branch loss was requested before the child coupler it depends on was solved.
class EvaluationOrderError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmesh
