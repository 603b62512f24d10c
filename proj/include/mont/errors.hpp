#pragma once

#include <stdexcept>
#include <string>

namespace mont {

// Bad or unreadable input data (files, columns, dimensions).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration values or inconsistent run stores.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mont
