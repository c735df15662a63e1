#pragma once

#include <stdexcept>
#include <string>

namespace fedcanon {

// Invalid configuration or violated precondition (bad step sizes, schema errors).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Non-finite state detected during optimization; names the offending round.
class DivergedError : public std::runtime_error {
public:
    DivergedError(const std::string& what, int round)
        : std::runtime_error(what + " at round " + std::to_string(round)), round_(round) {}
    int round() const { return round_; }

private:
    int round_;
};

// Internal state drifted past a declared tolerance (e.g. replicated copies disagree).
class ConsistencyError : public std::runtime_error {
public:
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedcanon
