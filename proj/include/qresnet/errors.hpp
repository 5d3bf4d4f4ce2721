#pragma once

#include <stdexcept>
#include <string>

namespace qresnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A size limit was exceeded (register cap, enumeration cap, ...).
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Wrong number of gate parameters.
class ArityError : public Error {
public:
    using Error::Error;
};

/// Shape, dimension or index mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument violates a mathematical precondition (non-Hermitian,
/// non-unitary, out-of-domain value, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The requested operation does not apply to the given variant.
class NotApplicableError : public Error {
public:
    using Error::Error;
};

/// Least-squares system is too ill-conditioned to trust.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Malformed binary or text input.
class ParseError : public Error {
public:
    using Error::Error;
};

/// An iterative method did not converge within its iteration budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Required input files are missing or unreadable.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qresnet
