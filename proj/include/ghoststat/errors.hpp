#pragma once

#include <stdexcept>
#include <string>

namespace ghoststat {

// Transform applied outside its domain (e.g. log of a zero-valued pixel).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A run whose statistics make the requested quantity undefined
// (all-opaque object, zero mean bucket, point-mass denominator ...).
class DegenerateError : public std::runtime_error {
public:
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unreadable file content.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ghoststat
