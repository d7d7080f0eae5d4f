#pragma once

#include <stdexcept>
#include <string>

namespace clpc {

// Error hierarchy mapped onto process exit codes by the CLI:
//   UsageError   -> 1  (bad flags, unknown config keys, invalid combinations)
//   DataError    -> 2  (unreadable/malformed files, shape mismatches on load)
//   ComputeError -> 3  (invalid runtime state: empty clouds, bad dimensions)
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ComputeError : public Error {
public:
    using Error::Error;
};

} // namespace clpc
