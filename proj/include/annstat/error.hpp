#pragma once

#include <stdexcept>
#include <string>

namespace annstat {

// Base of every error the toolkit raises. `module()` names the component
// that detected the problem so the CLI can report it with context.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& message);
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::string module, const std::string& message, std::string location);
    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

class DivergenceError : public Error {
public:
    DivergenceError(std::string module, int epoch, double loss);
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace annstat
