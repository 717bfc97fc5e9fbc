#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srvfgan {

/// Failure categories raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  DegenerateCurve,
  ShapeMismatch,
  AntipodalPoint,
  EmptySet,
  NoConvergence,
  ParseError,
  SchemaError,
  TooShort,
  MissingClass,
  InvalidSpec,
  NotInGraph,
  DomainError,
  ConfigError,
  NonFiniteLoss,
  VersionMismatch,
  CorruptFile,
  DimensionMismatch,
  OutOfBounds,
  SingleClass,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

/// True for errors caused by numerical failure rather than bad input.
bool is_numerical(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  /// The message without the error-code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace srvfgan
