#pragma once

#include <stdexcept>
#include <string>

namespace loadgen {

/// Bad user input: unreadable files, malformed records, inconsistent shapes.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (non-finite values, solver breakdown).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace loadgen
