#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qdd {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration: bad ranges, unknown keys, impossible sizes.
/// The CLI maps this family to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
    ConfigError(const std::string& what, std::string key) : Error(what), key_(std::move(key)) {}
    /// Offending key for range violations, empty otherwise.
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class InvalidGenotype : public Error {
public:
    using Error::Error;
};

class InvalidIndex : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyArchiveError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace qdd
