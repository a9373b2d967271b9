#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpsched {

// Bad or missing configuration (scenario files, run flags, trace paths).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed trace or scenario text. Carries the offending line (1-based).
class ParseError : public ConfigError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& detail)
        : ConfigError(source + ":" + std::to_string(line) + ": " + detail), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateEntryError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class IllegalStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Zero-length or inverted timing interval handed to a rate estimator.
class DegenerateIntervalError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A simulation invariant broke (event ordering, conservation, ...).
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dpsched
