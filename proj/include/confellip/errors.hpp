#pragma once

#include <stdexcept>
#include <string>

namespace confellip {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A symmetric matrix failed the positive-definiteness gate. No jitter is
// applied on failure; callers decide whether to raise the ridge parameter.
struct NotPositiveDefinite : Error {
    explicit NotPositiveDefinite(const std::string& msg) : Error(msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// alpha <= 1/(n+1): the conformal order statistic index would exceed n.
struct AlphaTooSmall : Error {
    explicit AlphaTooSmall(const std::string& msg) : Error(msg) {}
};

struct NoConvergence : Error {
    explicit NoConvergence(const std::string& msg) : Error(msg) {}
};

struct UnsupportedSmoothness : Error {
    explicit UnsupportedSmoothness(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct NoRoot : Error {
    explicit NoRoot(const std::string& msg) : Error(msg) {}
};

struct UndefinedMetric : Error {
    explicit UndefinedMetric(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace confellip
