#pragma once

#include <stdexcept>
#include <string>

namespace scentrank {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, violated invariants, invalid configuration.
/// The CLI maps this to exit code 1.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A generation or scoring backend failed. The CLI maps this to exit code 2.
class BackendError : public Error {
  public:
    using Error::Error;
};

/// Connection failures, timeouts, 429 and 5xx replies. Retried by RetryPolicy.
class TransportError : public BackendError {
  public:
    using BackendError::BackendError;
};

/// The endpoint answers but lacks a feature we need (e.g. prompt logprobs).
class CapabilityError : public BackendError {
  public:
    using BackendError::BackendError;
};

}  // namespace scentrank
