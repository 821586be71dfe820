#ifndef UQSIM_ERRORS_HPP
#define UQSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uqsim {

// Base class for everything thrown by the simulator.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenario/configuration problems. The CLI maps these to exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

struct MissingFileError : ConfigError {
    explicit MissingFileError(const std::string& path)
        : ConfigError("missing file: " + path), path(path) {}
    std::string path;
};

struct SchemaError : ConfigError {
    using ConfigError::ConfigError;
};

struct DanglingReferenceError : ConfigError {
    explicit DanglingReferenceError(const std::string& id, const std::string& where = "")
        : ConfigError("dangling reference: \"" + id + "\"" +
                      (where.empty() ? "" : " (" + where + ")")),
          id(id) {}
    std::string id;
};

struct ProbabilityError : ConfigError {
    using ConfigError::ConfigError;
};

struct InvalidParameterError : ConfigError {
    using ConfigError::ConfigError;
};

// A (service, stage, frequency) combination with no processing-time source.
struct MissingDistributionError : ConfigError {
    using ConfigError::ConfigError;
};

// Runtime errors. The CLI maps these to exit code 2.
struct CausalityError : Error {
    using Error::Error;
};

struct LivelockError : Error {
    using Error::Error;
};

struct EmptyQueueError : Error {
    using Error::Error;
};

struct DanglingCausalRefError : Error {
    using Error::Error;
};

struct IncompleteJobError : Error {
    using Error::Error;
};

struct NoSamplesError : Error {
    using Error::Error;
};

struct UnstableSystemError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct EndOfTraceError : Error {
    using Error::Error;
};

struct InvalidLevelError : Error {
    using Error::Error;
};

}  // namespace uqsim

#endif
