#pragma once

#include <stdexcept>
#include <string>

namespace rpp {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (config = 2, I/O = 3, numeric = 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
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

class ParseError : public IoError {
public:
    ParseError(const std::string& source, int line, const std::string& what)
        : IoError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

// Weights-file problems. Kind distinguishes the failure so callers can react.
class LoadError : public IoError {
public:
    enum class Kind { bad_magic, bad_version, truncated, shape_mismatch };

    LoadError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Weights do not fit the model configuration they are being transferred into.
class TransferError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class FitError : public NumericError {
public:
    using NumericError::NumericError;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class ReportError : public Error {
public:
    using Error::Error;
};

// Wraps an error raised inside a named pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, int exit_code)
        : Error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}

    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

// Exit status for an error reaching the command line: 2 for configuration
// and input-contract errors, 3 for I/O, 4 for numeric and other failures.
inline int exit_code_for(const std::exception& e) {
    if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
    if (dynamic_cast<const IoError*>(&e)) return 3;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
        dynamic_cast<const RangeError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
        dynamic_cast<const TransferError*>(&e) || dynamic_cast<const SplitError*>(&e)) {
        return 2;
    }
    return 4;
}

}  // namespace rpp
