#pragma once

#include <stdexcept>
#include <string>

namespace sgmix {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user-facing input: files, CSV rows, flag combinations, data shapes.
class input_error : public error {
public:
    using error::error;
};

/// Parameter-domain violations: non-SPD matrices, invalid scales,
/// degenerate skewness, non-splittable dimensions.
class numeric_error : public error {
public:
    using error::error;
};

/// A mixture component lost its support during fitting.
class collapse_error : public numeric_error {
public:
    collapse_error(int component, const std::string& what)
        : numeric_error(what), component_(component) {}
    int component() const noexcept { return component_; }

private:
    int component_;
};

}  // namespace sgmix
