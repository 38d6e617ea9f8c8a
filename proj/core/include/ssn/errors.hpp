#pragma once

#include <stdexcept>
#include <string>

namespace ssn {

// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
    Ok = 0,
    Config = 2,
    Io = 3,
    Backend = 4,
    Numerical = 5,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::Config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ExitCode::Io, what) {}
};

// Malformed input data (dataset records, model responses, shapes that do
// not match the configuration).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::Io, what) {}
};

// Record-level schema violation; carries the 1-based line number.
class RecordError : public DataError {
public:
    RecordError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(ExitCode::Backend, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::Numerical, what) {}
};

}  // namespace ssn
