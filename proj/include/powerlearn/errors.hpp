#pragma once

#include <stdexcept>
#include <string>

namespace powerlearn {

/// Bad argument or precondition violation supplied by the caller.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a z-score denominator (variance or quadratic form) is not positive.
class DegenerateVariance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No preferred direction exists (zero mean difference or cancelling average).
class DegenerateDirection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularMatrix : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed corpus file. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A record or corpus violated a data invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(long step, const std::string& what)
        : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
          step_(step) {}

    long step() const noexcept { return step_; }

private:
    long step_;
};

class GenerationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace powerlearn
