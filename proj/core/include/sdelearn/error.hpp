#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdelearn {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration values, argument shapes, file contents.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Expression syntax error; `position()` is a 0-based byte offset into the source.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& message, std::size_t position)
        : ConfigError(message + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Malformed or truncated binary/CSV file.
class FormatError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Numerical failure: blow-up, singular systems, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Expression evaluated outside its domain (sqrt of a negative, overflow, 0/0).
class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace sdelearn
