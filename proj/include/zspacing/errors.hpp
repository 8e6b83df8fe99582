#pragma once
#include <stdexcept>
#include <string>

namespace zspacing {

// Input/validation failure: malformed or inconsistent files, out-of-range
// values, bad dimensions.  The CLI maps these to exit code 2.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure of the computation itself, e.g. a degenerate collapse of
// the coordinate range.  The CLI maps these to exit code 3.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace zspacing
