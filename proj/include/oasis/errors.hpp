#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace oasis {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An input file or record does not follow its schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Vectors of different dimensions were combined.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A page yields no passage to sample from.
class UnusablePage : public Error {
 public:
  using Error::Error;
};

/// A metric was asked for on data where it has no value (e.g. single-class golds).
class MetricUndefined : public Error {
 public:
  using Error::Error;
};

/// The claim extractor returned nothing for a text, so it cannot be verified.
class UnverifiableInput : public Error {
 public:
  using Error::Error;
};

/// An LLM reply contains neither "Factual" nor "Not Factual".
class UnparseableVerdict : public Error {
 public:
  using Error::Error;
};

/// Failure to turn a generation reply into step outputs. `key()` names the
/// offending key, or is empty when no object could be parsed at all.
class GenerationParseError : public Error {
 public:
  GenerationParseError(const std::string& what, std::string key)
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class MalformedOutput : public GenerationParseError {
 public:
  explicit MalformedOutput(const std::string& what)
      : GenerationParseError("malformed output: " + what, "") {}
};

class MissingKey : public GenerationParseError {
 public:
  explicit MissingKey(const std::string& key)
      : GenerationParseError("missing key: " + key, key) {}
};

class TypeMismatch : public GenerationParseError {
 public:
  TypeMismatch(const std::string& key, const std::string& detail)
      : GenerationParseError("type mismatch in " + key + ": " + detail, key) {}
};

/// Generation gave up after the allowed number of attempts.
class ExhaustedRetries : public Error {
 public:
  ExhaustedRetries(int attempts, std::string last_failure)
      : Error("exhausted retries after " + std::to_string(attempts) +
              " attempts; last failure: " + last_failure),
        attempts_(attempts),
        last_failure_(std::move(last_failure)) {}
  int attempts() const noexcept { return attempts_; }
  const std::string& last_failure() const noexcept { return last_failure_; }

 private:
  int attempts_;
  std::string last_failure_;
};

enum class BackendErrorKind {
  kTimeout,
  kAuthFailure,
  kRateLimited,
  kMalformedResponse,
  kDimensionMismatch,
  kInvalidDistribution,
  kScriptExhausted,
  kTransport,
};

const char* to_string(BackendErrorKind kind) noexcept;

/// Inference failure. Always carries the fingerprint of the request that
/// triggered it so traces can be correlated.
class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, std::string fingerprint,
               const std::string& detail)
      : Error(std::string(to_string(kind)) + " [" + fingerprint + "]: " + detail),
        kind_(kind),
        fingerprint_(std::move(fingerprint)) {}

  BackendErrorKind kind() const noexcept { return kind_; }
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  BackendErrorKind kind_;
  std::string fingerprint_;
};

}  // namespace oasis
