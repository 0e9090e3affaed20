#pragma once

#include <stdexcept>
#include <string>

namespace pcion {

// Precondition or domain violation in a public call.
class InvalidArgument : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Configuration or data-file problem (unreadable, malformed, inconsistent).
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace pcion
