#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace halluscore {

/// Base class for every fault raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the path and 1-based line number (0 when
/// the fault is not tied to a line).
class ParseError : public Error {
public:
    ParseError(std::string path, std::size_t line, const std::string& what)
        : Error(format(path, line, what)), path_(std::move(path)), line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& path, std::size_t line,
                              const std::string& what) {
        if (line == 0) return path + ": " + what;
        return path + ":" + std::to_string(line) + ": " + what;
    }

    std::string path_;
    std::size_t line_;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class ScorerError : public Error {
public:
    using Error::Error;
};

class AggregationError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

/// Inputs that are individually well-formed but inconsistent with each other
/// (doc_id sets that do not match, tokenizations that cannot be paired).
class InputMismatchError : public Error {
public:
    using Error::Error;
};

/// Bad command-line usage.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace halluscore
