#pragma once

#include <stdexcept>
#include <string>

namespace derm {

// Unreadable/malformed files, bad dataset layout, dimension mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Inference backend failures: crash, timeout, protocol violation.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace derm
