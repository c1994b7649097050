#ifndef CSSCAN_ERRORS_HPP
#define CSSCAN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace csscan {

/// Bad arguments, inconsistent shapes, malformed files. CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite objectives and other numerical failures. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace csscan

#endif
