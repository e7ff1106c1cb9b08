#pragma once

#include <stdexcept>
#include <string>

namespace sfda {

// Invalid or rejected configuration (bad field values, out-of-range knobs,
// unusable model/routing combinations).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raster/tensor shape mismatch between operands.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage was asked to run before its inputs exist.
class DependencyError : public std::runtime_error {
public:
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sfda
