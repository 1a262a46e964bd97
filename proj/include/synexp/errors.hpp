#pragma once

#include <stdexcept>
#include <string>

namespace synexp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shapes of two objects do not agree (MDP vs policy, rewards vs values, ...).
struct DimensionError : Error {
    using Error::Error;
};

/// A numeric routine failed (singular solve, non-finite gradient, ...).
struct NumericError : Error {
    using Error::Error;
};

/// Invalid configuration: bad file, unknown key, out-of-range value.
struct ConfigError : Error {
    using Error::Error;
};

/// A remote or scripted backend failed. Carries the raw payload that caused
/// the failure so callers can log or retry with full context.
struct BackendError : Error {
    BackendError(const std::string& msg, bool retryable_ = false, std::string payload_ = {})
        : Error(msg), retryable(retryable_), payload(std::move(payload_)) {}
    bool retryable;
    std::string payload;
};

/// The backend's own turn budget was exceeded.
struct HorizonError : BackendError {
    explicit HorizonError(const std::string& msg) : BackendError(msg, false) {}
};

}  // namespace synexp
