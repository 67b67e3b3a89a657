#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bullbear {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes, see ExitCode in app.hpp.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data problems: missing files, malformed cells, too-short series.
class DataError : public Error {
public:
    using Error::Error;
};

class FileNotFound : public DataError {
public:
    explicit FileNotFound(const std::string& path)
        : DataError("file not found: " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Malformed cell. Line and column are 1-based.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : DataError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class EmptySeries : public DataError {
public:
    using DataError::DataError;
};

class InsufficientData : public DataError {
public:
    using DataError::DataError;
};

class InvalidParams : public Error {
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

// Optimizer
class Infeasible : public Error {
public:
    using Error::Error;
};

class Degenerate : public Error {
public:
    using Error::Error;
};

class ZeroVolatility : public Error {
public:
    using Error::Error;
};

// Environment
class OutOfRange : public Error {
public:
    using Error::Error;
};

class EpisodeDone : public Error {
public:
    using Error::Error;
};

// Networks and learner
class InvalidShape : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class EmptyBatch : public Error {
public:
    using Error::Error;
};

class InsufficientSamples : public Error {
public:
    using Error::Error;
};

// Metrics
class DegenerateCurve : public Error {
public:
    using Error::Error;
};

}  // namespace bullbear
