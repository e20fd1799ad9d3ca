#pragma once

#include <stdexcept>
#include <string>

namespace fscr {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition or type invariant was violated by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Burst detection did not find exactly two bursts in one gate period.
class BurstCountError : public Error {
public:
    using Error::Error;
};

/// Burst detection found bursts but could not align them to the gate template.
class LowConfidence : public Error {
public:
    using Error::Error;
};

/// The two spectral slices do not overlap enough to estimate the stitch gain.
class OverlapTooNarrow : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace fscr
