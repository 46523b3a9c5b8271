// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace acrag {

// Every failure raised by the engine derives from Error so callers can catch
// one type at the session boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Misconfigured engine, template pack, scripted behavior, or sweep grid.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public ConfigurationError {
 public:
  TemplateError(std::string message, std::string variable)
      : ConfigurationError(std::move(message)), variable_(std::move(variable)) {}

  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

// Backend could not be reached or timed out. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Backend replied with something that violates the completion contract.
// Never retried.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class EmptyCompletionError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class EmbedderError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  LoadError(std::string message, std::size_t line)
      : Error(std::move(message)), line_(line) {}

  // 1-based line number, 0 when the failure is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SweepConfigError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

}  // namespace acrag
