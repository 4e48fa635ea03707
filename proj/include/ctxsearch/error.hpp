#pragma once

#include <stdexcept>
#include <string>

namespace ctxsearch {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid generator or run configuration; the message names the offending field.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

/// Feature-schema or model-file mismatch.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Training data that cannot produce a classifier (e.g. a single label).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace ctxsearch
