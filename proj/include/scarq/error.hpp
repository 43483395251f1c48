#pragma once

#include <stdexcept>
#include <string>

namespace scarq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content (bad magic, bad header fields).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that uses a feature we do not handle.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Payload shorter than the header promises.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Value not representable in the requested type or outside its domain.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Input without enough structure for the operation (constant data, empty masks).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Grids whose dimensions disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace scarq
