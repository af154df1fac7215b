// Copyright 2026 The segbench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace segbench {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Undecodable or structurally wrong input (bad PNG, channel mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Value outside the operation's domain (zero-size image, dimension mismatch).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Encoded data whose internal sums do not add up.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

class RatioSumError : public Error {
 public:
  using Error::Error;
};

class InfeasibleSplitError : public Error {
 public:
  using Error::Error;
};

class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

class EmptyAggregateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failures talking to a predictor. The runner tallies these per example.
class PredictorError : public Error {
 public:
  PredictorError(std::string code, const std::string& what)
      : Error(what), code_(std::move(code)) {}

  /// Short machine-readable tag used in the failure tally.
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Connection refused, timeout, broken pipe. Retried by the clients.
class TransportError : public PredictorError {
 public:
  explicit TransportError(const std::string& what)
      : PredictorError("transport", what) {}
};

/// Response violates the wire contract (wrong id, wrong size, bad JSON).
class ProtocolError : public PredictorError {
 public:
  explicit ProtocolError(const std::string& what)
      : PredictorError("protocol_violation", what) {}
};

/// Server answered with an {"error":{...}} payload.
class ServerError : public PredictorError {
 public:
  ServerError(const std::string& server_code, const std::string& message,
              int http_status = 0)
      : PredictorError("server:" + server_code,
                       "server error " + server_code + ": " + message),
        server_code_(server_code),
        message_(message),
        http_status_(http_status) {}

  const std::string& server_code() const noexcept { return server_code_; }
  const std::string& server_message() const noexcept { return message_; }
  int http_status() const noexcept { return http_status_; }

 private:
  std::string server_code_;
  std::string message_;
  int http_status_;
};

/// Prediction not available for one example (missing or corrupt stub file).
class ExampleFailure : public PredictorError {
 public:
  using PredictorError::PredictorError;
};

}  // namespace segbench
