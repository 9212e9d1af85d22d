#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace fbq {

/// Base for all domain-level failures raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested moment (E B^2, Var B, ...) is infinite for this law.
class InfiniteMomentError : public Error {
public:
    using Error::Error;
};

/// Moment generating function evaluated beyond its abscissa of convergence.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double abscissa)
        : Error(what), abscissa_(abscissa) {}
    double abscissa() const noexcept { return abscissa_; }

private:
    double abscissa_;
};

/// Operation needs a density but the law has an atom (deterministic sizes).
class NoDensityError : public Error {
public:
    using Error::Error;
};

/// The (truncated) load is >= 1, so the requested stationary quantity does
/// not exist. Carries the critical size x* when it is known.
class OverloadError : public Error {
public:
    OverloadError(const std::string& what,
                  double critical_size = std::numeric_limits<double>::quiet_NaN())
        : Error(what), critical_size_(critical_size) {}
    double critical_size() const noexcept { return critical_size_; }

private:
    double critical_size_;
};

/// Arguments outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to converge or lost stability.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration (maps to exit code 2 in the CLI).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fbq
