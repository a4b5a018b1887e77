#pragma once

#include <stdexcept>
#include <string>

namespace evmob {

/// Base class for all pipeline failures that abort a unit of work.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable or structurally broken input (bad stream, bad config).
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration document or missing required key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Transport or backend failure after exhausting retries. Carries the last
/// HTTP status seen (0 when the failure was not an HTTP response).
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int last_status)
        : Error(what), last_status_(last_status) {}
    int last_status() const { return last_status_; }

private:
    int last_status_ = 0;
};

/// The scripted backend ran out of queued responses. This signals a broken
/// test script, not a pipeline condition.
class ScriptError : public Error {
public:
    using Error::Error;
};

/// Structured-output parsing failed even after the bounded repair re-ask.
class StructuredOutputError : public Error {
public:
    StructuredOutputError(const std::string& what, std::string first_response,
                          std::string second_response = {})
        : Error(what),
          first_response_(std::move(first_response)),
          second_response_(std::move(second_response)) {}
    const std::string& first_response() const { return first_response_; }
    const std::string& second_response() const { return second_response_; }

private:
    std::string first_response_;
    std::string second_response_;
};

/// A caller violated a documented operation precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

} // namespace evmob
