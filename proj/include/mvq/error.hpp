#pragma once

#include <stdexcept>
#include <string>

namespace mvq {

// Root of every error the library throws. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Token index outside [0, K) or class target outside the logit range.
class IndexError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Binary file format errors. Each failure mode has its own type so callers
// (and tests) can tell a corrupt header from a short read.
class FormatError : public Error {
public:
    using Error::Error;
};

class BadMagic : public FormatError {
public:
    using FormatError::FormatError;
};

class UnknownVersion : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedFile : public FormatError {
public:
    using FormatError::FormatError;
};

class SizeMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

// The file could not be opened, read or written.
class FileError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    ParseError(int line, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

} // namespace mvq
