#pragma once

#include <stdexcept>
#include <string>

namespace skytrack {

/// Caller violated an operation's preconditions (bad arguments, mismatched
/// dimensions, parameters out of range).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file could not be parsed; carries the 1-based line of the offending record.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, int line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          path_(path), line_(line) {}

    const std::string& path() const { return path_; }
    int line() const { return line_; }

private:
    std::string path_;
    int line_;
};

/// Input parsed but carries out-of-range or inconsistent values.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what), line_(0) {}
    ValidationError(const std::string& path, int line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

/// Phase correlation found no usable peak (e.g. featureless frames whose
/// spectra vanish off DC); no displacement can be decided.
class IndeterminateDisplacementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given inputs (e.g. AP without ground truth).
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace skytrack
