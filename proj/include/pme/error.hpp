#pragma once

#include <stdexcept>
#include <string>

namespace pme {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong shapes, asymmetric input, out-of-range options.
class InputError : public Error {
public:
    using Error::Error;
};

/// A unit is too short for the requested number of sub-samples.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Zero variances, zero standard errors, singular blocks.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// R * B_hat is singular or too ill-conditioned to identify the relations.
class IdentificationError : public Error {
public:
    using Error::Error;
};

/// An iterative routine failed to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Infeasible simulation design (no real loadings, no kappa root, ...).
class DesignError : public Error {
public:
    using Error::Error;
};

/// CSV / JSON parse failure. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace pme
