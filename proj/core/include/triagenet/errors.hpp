#pragma once

#include <stdexcept>
#include <string>

namespace triagenet {

/// Bad input data: malformed files, out-of-range fields, contract violations.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure: non-finite values, solver non-convergence.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace triagenet
