#pragma once

#include <stdexcept>
#include <string>

namespace nsc {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operands have incompatible shapes (matrix/vector dimension mismatch).
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

/// A constraint row is degenerate (zero normal with a negative bound).
class DegenerateConstraint : public Error {
public:
    explicit DegenerateConstraint(const std::string& what) : Error(what) {}
};

/// A safe decision set has an empty feasible region.
class SafeSetEmpty : public Error {
public:
    explicit SafeSetEmpty(const std::string& what) : Error(what) {}
};

/// An iterative routine failed to converge within its budget.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

/// A disturbance-action policy was evaluated with too little history.
class HistoryError : public Error {
public:
    explicit HistoryError(const std::string& what) : Error(what) {}
};

/// A scenario/config file could not be parsed or is inconsistent.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Reading or writing run artifacts (CSV, charts) failed.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

} // namespace nsc
