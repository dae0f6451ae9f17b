// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace synthforge {

/// Broad failure categories surfaced by the library.  Every exception thrown
/// by synthforge derives from Error, so callers can catch one base type and
/// still branch on the kind when they need to.
enum class ErrorKind {
  dimension,   ///< shape or extent mismatch between tensors
  argument,    ///< invalid argument value (out of range, wrong count, ...)
  domain,      ///< math domain violation (log of a negative value, ...)
  numeric,     ///< non-finite value where a finite one is required
  parse,       ///< malformed text input (config, CSV, PGM header)
  validation,  ///< well-formed input that violates a semantic rule
  config,      ///< invalid configuration record handed to a builder
  capability,  ///< operation unsupported by the selected model family
  load,        ///< malformed or incompatible checkpoint
  io,          ///< filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorKind::dimension, m) {}
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& m) : Error(ErrorKind::argument, m) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error(ErrorKind::domain, m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorKind::numeric, m) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorKind::parse, m) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

struct CapabilityError : Error {
  explicit CapabilityError(const std::string& m) : Error(ErrorKind::capability, m) {}
};

struct LoadError : Error {
  explicit LoadError(const std::string& m) : Error(ErrorKind::load, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

}  // namespace synthforge
