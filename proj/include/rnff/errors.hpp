#pragma once

#include <stdexcept>
#include <string>

namespace rnff {

/// Invalid argument or violated precondition (CLI exit code 2).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Request exceeds what the implementation supports, e.g. enumeration
/// budgets or missing stored data (CLI exit code 4).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rnff
