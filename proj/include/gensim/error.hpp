#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gensim {

enum class ErrorKind {
  validation,
  not_found,
  conflict,
  format,
  backend,
  transport,
  protocol,
  io,
};

const char* to_string(ErrorKind kind);

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

/// Config validation failure carrying one message per offending field.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> field_errors);

  const std::vector<std::string>& field_errors() const noexcept { return field_errors_; }

 private:
  std::vector<std::string> field_errors_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error(ErrorKind::not_found, message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error(ErrorKind::conflict, message) {}
};

/// Model output that could not be parsed; keeps the raw text for inspection.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::string raw)
      : Error(ErrorKind::format, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

/// Failure of a chat backend. Retryable failures are eligible for backoff.
class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable, std::string backend_id = {})
      : Error(ErrorKind::backend, message),
        retryable_(retryable),
        backend_id_(std::move(backend_id)) {}

  bool retryable() const noexcept { return retryable_; }
  const std::string& backend_id() const noexcept { return backend_id_; }

 private:
  bool retryable_;
  std::string backend_id_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message) : Error(ErrorKind::transport, message) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message) : Error(ErrorKind::protocol, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

}  // namespace gensim
