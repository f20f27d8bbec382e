#pragma once

#include <stdexcept>
#include <string>

namespace cpb {

/// Process exit codes shared by the CLI and the error hierarchy.
enum class ExitCode : int {
    Success = 0,
    InputError = 2,
    TrainingFailure = 3,
    UndefinedMetric = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::InputError; }
};

/// Malformed input text. Carries the offending file and 1-based line.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}
    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Ids that do not line up across the pairs/info/target files.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// A value violating a domain invariant (empty vectors, bad binary codes...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::TrainingFailure; }
};

/// A metric that has no value on the given labels (e.g. an AUC without negatives).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::UndefinedMetric; }
};

}  // namespace cpb
