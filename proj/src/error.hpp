// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cttts {

// Malformed or inconsistent user input (configuration, instance files,
// out-of-domain arguments).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Syntactically malformed JSON; message carries line and column.
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Failure while running a computation on valid input (rejection budget
// exhausted, non-bracketing root search, replication abort).
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cttts
