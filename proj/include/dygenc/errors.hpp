#pragma once

#include <stdexcept>
#include <string>

namespace dygenc {

// Base of every error the library raises. `exit_code` maps onto the CLI contract.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int exit_code = 1)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericsError : public Error {
public:
    explicit NumericsError(const std::string& what) : Error(what, 3) {}
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), detail_(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t line_;
};

class EmptySequence : public Error {
public:
    using Error::Error;
};

class EmbedError : public Error {
public:
    using Error::Error;
};

class EmptyGraphError : public Error {
public:
    using Error::Error;
};

} // namespace dygenc
