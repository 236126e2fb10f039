#pragma once

#include <stdexcept>
#include <string>

namespace counterprobe {

// Every failure the library reports derives from Error. The CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A row or document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Parsed data violates a registry, lexicon or dataset invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The caller violated an operation precondition (bad k, wrong kind, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Inconsistent setup: empty sampling pool, unknown model, missing family.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The backend could not be reached. `transient` failures are retried.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool transient)
      : Error(what), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

// The backend answered with something that does not satisfy the protocol.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw_payload)
      : Error(what), raw_payload_(std::move(raw_payload)) {}
  const std::string& raw_payload() const noexcept { return raw_payload_; }

 private:
  std::string raw_payload_;
};

// A probe run exceeded its failure budget.
class RunAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace counterprobe
