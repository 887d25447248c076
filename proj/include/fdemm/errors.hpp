#pragma once

#include <stdexcept>
#include <string>

namespace fdemm {

enum class ErrorKind {
    Domain,
    Range,
    DivergentIntegral,
    ToleranceNotMet,
    NoRoot,
    EquivalenceFailure,
    Normalization,
    Unsupported,
    InvalidModel,
    NonpositiveDensity,
    Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

/// Argument outside the range of an invertible map; carries the feasible interval.
class RangeError : public Error {
public:
    RangeError(const std::string& what, double lo, double hi)
        : Error(ErrorKind::Range, what), lo_(lo), hi_(hi) {}

    double feasible_lo() const noexcept { return lo_; }
    double feasible_hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

class DivergentIntegral : public Error {
public:
    explicit DivergentIntegral(const std::string& what)
        : Error(ErrorKind::DivergentIntegral, what) {}
};

class ToleranceNotMet : public Error {
public:
    ToleranceNotMet(const std::string& what, double achieved)
        : Error(ErrorKind::ToleranceNotMet, what), achieved_(achieved) {}

    double achieved_error() const noexcept { return achieved_; }

private:
    double achieved_;
};

class NoRoot : public Error {
public:
    explicit NoRoot(const std::string& what) : Error(ErrorKind::NoRoot, what) {}
};

class EquivalenceFailure : public Error {
public:
    explicit EquivalenceFailure(const std::string& what)
        : Error(ErrorKind::EquivalenceFailure, what) {}
};

class NormalizationError : public Error {
public:
    explicit NormalizationError(const std::string& what)
        : Error(ErrorKind::Normalization, what) {}
};

class Unsupported : public Error {
public:
    explicit Unsupported(const std::string& what) : Error(ErrorKind::Unsupported, what) {}
};

class InvalidModel : public Error {
public:
    explicit InvalidModel(const std::string& what) : Error(ErrorKind::InvalidModel, what) {}
};

class NonpositiveDensity : public Error {
public:
    explicit NonpositiveDensity(const std::string& what) : Error(ErrorKind::NonpositiveDensity, what) {}
};

/// Malformed or physically invalid configuration; the message names the location.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

}  // namespace fdemm
