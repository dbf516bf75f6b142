#pragma once

#include <stdexcept>
#include <string>

namespace vmem {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs outside a function's mathematical domain (inverted prices,
/// non-invertible ARMA parameters, non-positive forecasts, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed files and configuration documents.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);
    ParseError(const std::string& source, const std::string& what);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Parameter sets that violate the stationarity/invertibility region.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Failures of the numerical estimation machinery.
class EstimationError : public Error {
public:
    using Error::Error;
};

}  // namespace vmem
