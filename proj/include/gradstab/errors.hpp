#pragma once

#include <stdexcept>
#include <string>

namespace gradstab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Dimension or history-length mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Scheme order outside {1,2,3}.
class UnsupportedOrder : public Error {
public:
    using Error::Error;
};

/// A quadratic form failed a positive-definiteness requirement.
class DefinitenessError : public Error {
public:
    using Error::Error;
};

/// Requested stability constant exceeds the optimal one.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// An iterative solver or optimizer did not converge within its budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A theorem-level precondition of an audit is not met.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Malformed or incomplete experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gradstab
