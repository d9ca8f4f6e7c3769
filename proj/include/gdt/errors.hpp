#pragma once

#include <stdexcept>
#include <string>

namespace gdt {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands; the message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed input or container file (CSV, checkpoint).
struct FormatError : Error {
  using Error::Error;
};

/// Network-level failure talking to the translation service.
struct TransportError : Error {
  using Error::Error;
};

/// Translation service answered with a non-2xx status.
struct ServiceError : Error {
  ServiceError(const std::string& msg, int status_code) : Error(msg), status(status_code) {}
  int status;
};

/// Translation service answered 2xx but the body was not understood.
struct ProtocolError : Error {
  using Error::Error;
};

}  // namespace gdt
