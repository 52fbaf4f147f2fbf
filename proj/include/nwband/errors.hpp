#pragma once

#include <stdexcept>
#include <string>

namespace nwband {

/// Raised when an argument violates an operation's documented precondition
/// (dimension mismatch, non-finite entries, infeasible starting point, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A side condition of the oracle-inequality constants does not hold.
class PreconditionViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// CSV ingestion problems. Messages carry row/column context.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreprocessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nwband
