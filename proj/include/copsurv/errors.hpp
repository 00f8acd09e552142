#pragma once

#include <stdexcept>
#include <string>

namespace copsurv {

/// Numerical failure (quadrature non-convergence, root bracketing,
/// singular matrix, ...) as opposed to a caller-side domain error.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// File / format errors raised by the CSV and JSON layer.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace copsurv
