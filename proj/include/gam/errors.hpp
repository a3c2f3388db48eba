#pragma once

#include <stdexcept>
#include <string>

namespace gam {

/// Malformed model or experiment input.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure; `diagnostics` holds a JSON document describing the state.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::string diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace gam
