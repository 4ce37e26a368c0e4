#pragma once

#include <stdexcept>
#include <string>

namespace mapo {

/// Base for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

/// Anything that went wrong while obtaining a completion.
class GatewayError : public Error {
public:
    using Error::Error;
};

/// Live backend failed after exhausting its retry budget (or hit a non-retryable status).
class NetworkError : public GatewayError {
public:
    NetworkError(const std::string& what, int status = 0, bool retryable = true)
        : GatewayError(what), status_(status), retryable_(retryable) {}

    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

/// Replay mode saw a request that is not in the transcript.
class CacheMissError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// Scripted backend has no response for a request.
class ScriptExhaustedError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

}  // namespace mapo
